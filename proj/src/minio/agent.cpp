#include "swarm/minio/agent.hpp"

#include "swarm/ids.hpp"

#include <algorithm>

namespace swarm::minio {

namespace {

constexpr std::size_t listing_cap = 100000;

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string file_name(std::string_view key) {
    auto slash = key.rfind('/');
    return std::string(slash == std::string_view::npos ? key : key.substr(slash + 1));
}

std::string stem(std::string_view name) {
    auto dot = name.rfind('.');
    return std::string(dot == std::string_view::npos ? name : name.substr(0, dot));
}

bool namespace_visible(const UserContext& ctx, const std::string& ns) {
    return ns == ctx.namespace_name || ns == shared_namespace;
}

std::string humanize(std::string_view viz) {
    std::string out;
    std::size_t start = 0;
    while (start <= viz.size()) {
        auto end = viz.find_first_of("_-", start);
        if (end == std::string_view::npos) end = viz.size();
        auto word = std::string(viz.substr(start, end - start));
        if (word == "roc" || word == "pr" || word == "auc") std::transform(word.begin(), word.end(), word.begin(), ::toupper);
        if (!out.empty() && !word.empty()) out += ' ';
        out += word;
        start = end + 1;
    }
    if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return out;
}

std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string format_delta(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.3f", v);
    return buf;
}

} // namespace

std::string_view to_string(ArtifactKind kind) {
    switch (kind) {
    case ArtifactKind::metrics: return "metrics";
    case ArtifactKind::visualization: return "visualization";
    case ArtifactKind::model: return "model";
    case ArtifactKind::log: return "log";
    case ArtifactKind::other: return "other";
    }
    return "other";
}

ArtifactKind classify_artifact(std::string_view key) {
    auto k = lower(key);
    if (ends_with(k, ".json")) return ArtifactKind::metrics;
    if (ends_with(k, ".png") || ends_with(k, ".svg")) return ArtifactKind::visualization;
    if (ends_with(k, ".pkl") || ends_with(k, ".bin")) return ArtifactKind::model;
    if (ends_with(k, ".log")) return ArtifactKind::log;
    return ArtifactKind::other;
}

json ArtifactRef::to_json() const {
    json j{{"kind", to_string(kind)}, {"stat", minio::to_json(stat)}};
    j["run_id"] = run_id ? json(*run_id) : json(nullptr);
    return j;
}

std::string artifact_dir(std::string_view pipeline_name) {
    constexpr std::string_view suffix = "-pipeline";
    if (ends_with(pipeline_name, suffix) && pipeline_name.size() > suffix.size())
        pipeline_name.remove_suffix(suffix.size());
    return std::string(pipeline_name);
}

PresignRegistry::PresignRegistry(std::string public_base_url, std::chrono::seconds ttl, Clock clock)
    : public_base_url_(std::move(public_base_url)), ttl_(ttl), clock_(std::move(clock)) {
    while (!public_base_url_.empty() && public_base_url_.back() == '/') public_base_url_.pop_back();
}

PresignRegistry::Handle PresignRegistry::issue(const std::string& bucket, const std::string& key,
                                               const std::string& user_id) {
    auto now = clock_();
    auto expires = now + std::chrono::duration_cast<std::chrono::milliseconds>(ttl_);
    auto token = random_hex(16);
    {
        std::lock_guard lock(mu_);
        for (auto it = handles_.begin(); it != handles_.end();)
            it = it->second.second <= now ? handles_.erase(it) : std::next(it);
        handles_[token] = {Target{bucket, key, user_id}, expires};
    }
    auto epoch_s = std::chrono::duration_cast<std::chrono::seconds>(expires.time_since_epoch()).count();
    return {token, public_base_url_ + "/api/artifacts/" + token + "?expires=" + std::to_string(epoch_s), expires};
}

std::optional<PresignRegistry::Target> PresignRegistry::resolve(const std::string& token) const {
    auto now = clock_();
    std::lock_guard lock(mu_);
    auto it = handles_.find(token);
    if (it == handles_.end() || it->second.second <= now) return std::nullopt;
    return it->second.first;
}

MinioAgent::MinioAgent(ObjectStore& store, const RunCatalog* catalog, PresignRegistry& presign, Options options)
    : store_(store), catalog_(catalog), presign_(presign), options_(std::move(options)) {}

void MinioAgent::require_bucket(const UserContext& ctx, const std::string& bucket) const {
    if (!ctx.can_access_bucket(bucket))
        throw ToolError(ErrorType::permission_denied, "bucket " + bucket + " is not granted to this user",
                        {{"bucket", bucket}});
}

std::vector<BucketInfo> MinioAgent::list_user_buckets(const UserContext& ctx) {
    std::vector<BucketInfo> out;
    if (ctx.allowed_buckets.empty()) return out;
    for (auto& b : store_.list_buckets())
        if (ctx.can_access_bucket(b.name)) out.push_back(std::move(b));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return out;
}

ListResult MinioAgent::get_minio_info(const UserContext& ctx, const std::string& bucket, const std::string& prefix,
                                      bool recursive, std::optional<std::size_t> limit) {
    require_bucket(ctx, bucket);
    auto n = limit.value_or(options_.default_limit);
    if (n == 0 || n > options_.max_limit)
        throw ToolError(ErrorType::invalid_argument,
                        "limit must be between 1 and " + std::to_string(options_.max_limit), {{"parameter", "limit"}});
    return store_.list_objects(bucket, prefix, recursive, n);
}

std::string MinioAgent::resolve_run(const UserContext& ctx, const std::string& dir,
                                    const std::optional<std::string>& run_id, std::string_view required_file) {
    const auto& bucket = options_.artifact_bucket;
    require_bucket(ctx, bucket);

    auto visible = [&](const std::string& run) {
        if (!catalog_) return true;
        auto info = catalog_->find_run(run);
        return !info || namespace_visible(ctx, info->namespace_name);
    };
    auto has_file = [&](const std::string& run) {
        if (required_file.empty()) return true;
        auto key = dir + "/" + run + "/" + std::string(required_file);
        auto listing = store_.list_objects(bucket, key, true, 1);
        return !listing.objects.empty() && listing.objects.front().key == key;
    };

    if (run_id) {
        if (run_id->empty() || run_id->find('/') != std::string::npos)
            throw ToolError(ErrorType::invalid_argument, "run_id is malformed", {{"parameter", "run_id"}});
        if (!visible(*run_id))
            throw ToolError(ErrorType::permission_denied, "run " + *run_id + " belongs to another namespace",
                            {{"run_id", *run_id}});
        if (run_objects(dir, *run_id).empty())
            throw ToolError(ErrorType::not_found, "no artifacts for run " + *run_id + " of pipeline " + dir,
                            {{"pipeline_name", dir}, {"run_id", *run_id}});
        if (!has_file(*run_id))
            throw ToolError(ErrorType::not_found,
                            "run " + *run_id + " has no " + std::string(required_file),
                            {{"pipeline_name", dir}, {"run_id", *run_id}});
        return *run_id;
    }

    auto listing = store_.list_objects(bucket, dir + "/", false, listing_cap);
    std::vector<std::string> candidates;
    for (const auto& p : listing.prefixes) {
        auto run = p.substr(dir.size() + 1);
        if (!run.empty() && run.back() == '/') run.pop_back();
        if (!run.empty() && visible(run) && has_file(run)) candidates.push_back(std::move(run));
    }
    if (candidates.empty())
        throw ToolError(ErrorType::not_found,
                        "no " + (required_file.empty() ? std::string("artifacts") : std::string(required_file)) +
                            " found for pipeline " + dir,
                        {{"pipeline_name", dir}});

    if (catalog_) {
        std::optional<RunInfo> best;
        for (const auto& info : catalog_->runs_for_artifact_dir(dir)) {
            if (std::find(candidates.begin(), candidates.end(), info.run_id) == candidates.end()) continue;
            if (!best || info.created_at > best->created_at ||
                (info.created_at == best->created_at && info.run_id > best->run_id))
                best = info;
        }
        if (best) return best->run_id;
    }
    return *std::max_element(candidates.begin(), candidates.end());
}

std::vector<ObjectStat> MinioAgent::run_objects(const std::string& dir, const std::string& run_id) {
    return store_.list_objects(options_.artifact_bucket, dir + "/" + run_id + "/", true, listing_cap).objects;
}

std::vector<ArtifactRef> MinioAgent::get_pipeline_artifacts(const UserContext& ctx, const std::string& pipeline_name,
                                                            const std::optional<std::string>& run_id) {
    auto dir = artifact_dir(pipeline_name);
    auto run = resolve_run(ctx, dir, run_id, {});
    std::vector<ArtifactRef> out;
    for (auto& stat : run_objects(dir, run)) {
        auto kind = classify_artifact(stat.key);
        out.push_back({kind, std::move(stat), run});
    }
    return out;
}

ModelMetrics MinioAgent::get_model_metrics(const UserContext& ctx, const std::string& pipeline_name,
                                           const std::optional<std::string>& run_id) {
    auto dir = artifact_dir(pipeline_name);
    auto run = resolve_run(ctx, dir, run_id, artifact_files::metrics);
    auto key = dir + "/" + run + "/" + std::string(artifact_files::metrics);
    auto obj = store_.get_object(options_.artifact_bucket, key);
    if (!obj) throw ToolError(ErrorType::not_found, "metrics object vanished: " + key);
    return parse_model_metrics(obj->bytes, {pipeline_name, run, key});
}

json MinioAgent::get_pipeline_visualization(const UserContext& ctx, const std::string& pipeline_name,
                                            const std::string& viz_name, const std::optional<std::string>& run_id) {
    if (viz_name.empty()) throw ToolError(ErrorType::invalid_argument, "viz_name is empty", {{"parameter", "viz_name"}});
    auto dir = artifact_dir(pipeline_name);
    auto run = resolve_run(ctx, dir, run_id, {});
    std::vector<std::string> available;
    for (auto& stat : run_objects(dir, run)) {
        if (classify_artifact(stat.key) != ArtifactKind::visualization) continue;
        auto name = file_name(stat.key);
        if (name != viz_name && stem(name) != viz_name) {
            available.push_back(stem(name));
            continue;
        }
        auto handle = presign_.issue(options_.artifact_bucket, stat.key, ctx.user_id);
        auto caption = humanize(stem(name)) + " for " + dir + " (run " + run + ", " +
                       std::to_string(stat.size_bytes) + " bytes)";
        ArtifactRef ref{ArtifactKind::visualization, std::move(stat), run};
        return {{"artifact", ref.to_json()},
                {"handle",
                 {{"url", handle.url}, {"token", handle.token}, {"expires_at", format_timestamp(handle.expires_at)}}},
                {"caption", caption}};
    }
    throw ToolError(ErrorType::not_found, "no visualization named " + viz_name + " for run " + run,
                    {{"pipeline_name", dir}, {"run_id", run}, {"available", available}});
}

json MinioAgent::compare_runs(const UserContext& ctx, const std::vector<RunRef>& refs) {
    if (refs.size() < 2) throw ToolError(ErrorType::invalid_argument, "compare_runs needs at least two refs");
    static const char* const names[] = {"accuracy", "precision", "recall", "f1", "auc"};

    struct Column {
        std::string label;
        RunRef ref;
        std::optional<ModelMetrics> metrics;
    };
    std::vector<Column> columns;
    json warnings = json::array();
    for (const auto& ref : refs) {
        Column col{artifact_dir(ref.pipeline_name), ref, std::nullopt};
        try {
            col.metrics = get_model_metrics(ctx, ref.pipeline_name, ref.run_id);
            col.label = col.metrics->source.pipeline_name + "@" + col.metrics->source.run_id;
        } catch (const ToolError& e) {
            if (e.kind() == ErrorType::permission_denied) throw;
            warnings.push_back(col.label + (ref.run_id ? "@" + *ref.run_id : "") + ": " + e.what());
        }
        columns.push_back(std::move(col));
    }
    auto base = std::find_if(columns.begin(), columns.end(), [](const Column& c) { return c.metrics.has_value(); });
    if (base == columns.end()) throw ToolError(ErrorType::not_found, "none of the refs resolved", {{"warnings", warnings}});
    if (base != columns.begin()) warnings.push_back("deltas are relative to " + base->label + ", the first resolved ref");

    auto value = [](const ModelMetrics& m, std::string_view name) -> std::optional<double> {
        if (name == "accuracy") return m.accuracy;
        if (name == "precision") return m.precision;
        if (name == "recall") return m.recall;
        if (name == "f1") return m.f1;
        return m.auc;
    };

    json runs = json::array();
    json leaders = json::object();
    std::map<std::string, std::pair<double, std::string>> best;
    for (const auto& col : columns) {
        json values = json::object(), deltas = json::object();
        for (const char* name : names) {
            std::optional<double> v = col.metrics ? value(*col.metrics, name) : std::nullopt;
            auto b = value(*base->metrics, name);
            values[name] = v ? json(*v) : json("absent");
            deltas[name] = v && b ? json(*v - *b) : json("absent");
            if (v && (!best.contains(name) || *v > best[name].first)) best[name] = {*v, col.label};
        }
        json run{{"label", col.label},
                 {"pipeline_name", col.ref.pipeline_name},
                 {"resolved", col.metrics.has_value()},
                 {"values", values},
                 {"deltas", deltas}};
        run["run_id"] = col.metrics ? json(col.metrics->source.run_id) : (col.ref.run_id ? json(*col.ref.run_id) : json(nullptr));
        runs.push_back(std::move(run));
    }
    for (const auto& [name, entry] : best) leaders[name] = entry.second;

    std::string md = "| metric |";
    for (const auto& col : columns) md += " " + col.label + " |";
    md += "\n|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) md += "---|";
    md += "\n";
    for (const char* name : names) {
        md += std::string("| ") + name + " |";
        for (const auto& col : columns) {
            std::optional<double> v = col.metrics ? value(*col.metrics, name) : std::nullopt;
            auto b = value(*base->metrics, name);
            if (!v) {
                md += " absent |";
            } else if (&col == &*base || !b) {
                md += " " + format_metric(*v) + " |";
            } else {
                md += " " + format_metric(*v) + " (" + format_delta(*v - *b) + ") |";
            }
        }
        md += "\n";
    }
    return {{"metrics", names}, {"baseline", base->label}, {"runs", runs},
            {"leaders", leaders}, {"warnings", warnings}, {"markdown", md}};
}

namespace {

using llm::ParamSpec;
using llm::ParamType;
using llm::ToolDescriptor;

std::optional<std::string> opt_string(const json& args, const char* name) {
    if (!args.contains(name) || args[name].is_null()) return std::nullopt;
    return args[name].get<std::string>();
}

} // namespace

void register_minio_tools(orch::ToolRegistry& registry, MinioAgent& agent) {
    using orch::AgentTag;
    const ParamSpec pipeline{"pipeline_name", ParamType::string, true, std::nullopt,
                             "Pipeline name, e.g. diabetes-svm-classification"};
    const ParamSpec run{"run_id", ParamType::string, false, std::nullopt, "Run id; omit for the latest run"};

    registry.register_tool(
        {"list_user_buckets", "List the object-storage buckets the current user may access.", {}},
        [&agent](const json&, const UserContext& ctx) {
            json buckets = json::array();
            for (const auto& b : agent.list_user_buckets(ctx)) buckets.push_back(to_json(b));
            return json{{"buckets", buckets}, {"count", buckets.size()}};
        },
        AgentTag::minio);

    registry.register_tool(
        {"get_minio_info",
         "List objects in a bucket under an optional prefix. Non-recursive listings group deeper keys into folders.",
         {{"bucket", ParamType::string, true, std::nullopt, "Bucket name"},
          {"prefix", ParamType::string, false, json(""), "Key prefix"},
          {"recursive", ParamType::boolean, false, json(false), "Descend into folders"},
          {"limit", ParamType::integer, false, json(agent.options().default_limit), "Maximum entries"}}},
        [&agent](const json& args, const UserContext& ctx) {
            auto limit = args["limit"].get<std::int64_t>();
            if (limit < 1) throw ToolError(ErrorType::invalid_argument, "limit must be positive", {{"parameter", "limit"}});
            auto bucket = args["bucket"].get<std::string>();
            auto prefix = args["prefix"].get<std::string>();
            auto listing = agent.get_minio_info(ctx, bucket, prefix, args["recursive"].get<bool>(),
                                                static_cast<std::size_t>(limit));
            auto j = to_json(listing);
            j["bucket"] = bucket;
            j["prefix"] = prefix;
            return j;
        },
        AgentTag::minio);

    registry.register_tool(
        {"get_pipeline_artifacts", "List a pipeline run's stored artifacts classified by kind.", {pipeline, run}},
        [&agent](const json& args, const UserContext& ctx) {
            auto refs = agent.get_pipeline_artifacts(ctx, args["pipeline_name"].get<std::string>(), opt_string(args, "run_id"));
            json artifacts = json::array();
            for (const auto& r : refs) artifacts.push_back(r.to_json());
            return json{{"pipeline_name", args["pipeline_name"]},
                        {"run_id", refs.empty() ? json(nullptr) : json(*refs.front().run_id)},
                        {"artifacts", artifacts}};
        },
        AgentTag::minio);

    registry.register_tool(
        {"get_model_metrics",
         "Read a run's evaluation metrics (accuracy, precision, recall, f1, auc, confusion matrix).",
         {pipeline, run}},
        [&agent](const json& args, const UserContext& ctx) {
            return agent.get_model_metrics(ctx, args["pipeline_name"].get<std::string>(), opt_string(args, "run_id"))
                .to_json();
        },
        AgentTag::minio);

    registry.register_tool(
        {"get_pipeline_visualization",
         "Fetch a run's plot (e.g. roc_curve, confusion_matrix) as a short-lived download link with a caption.",
         {pipeline, {"viz_name", ParamType::string, true, std::nullopt, "Visualization name, e.g. roc_curve"}, run}},
        [&agent](const json& args, const UserContext& ctx) {
            return agent.get_pipeline_visualization(ctx, args["pipeline_name"].get<std::string>(),
                                                    args["viz_name"].get<std::string>(), opt_string(args, "run_id"));
        },
        AgentTag::minio);
}

} // namespace swarm::minio
