#include "swarm/kfp/agent.hpp"

#include "swarm/ids.hpp"
#include "swarm/minio/agent.hpp"
#include "swarm/orchestrator/error_envelope.hpp"

#include <algorithm>
#include <charconv>

namespace swarm::kfp {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool contains_ci(std::string_view haystack, const std::string& needle_lower) {
    return needle_lower.empty() || lower(haystack).find(needle_lower) != std::string::npos;
}

json version_summary(const PipelineVersion& v) {
    return {{"version_id", v.version_id}, {"name", v.name}, {"created_at", format_timestamp(v.created_at)}};
}

json pipeline_summary(const Pipeline& p) {
    json versions = json::array();
    for (const auto& v : p.versions) versions.push_back(version_summary(v));
    return {{"id", p.id},
            {"name", p.name},
            {"description", p.description},
            {"namespace", p.namespace_name},
            {"created_at", format_timestamp(p.created_at)},
            {"pipeline_versions", versions}};
}

json parameters_json(const ParameterList& params) {
    json out = json::object();
    for (const auto& p : params) out[p.name] = p.to_json();
    return out;
}

std::optional<std::string> opt_string(const json& args, const char* name) {
    if (!args.contains(name) || args[name].is_null()) return std::nullopt;
    return args[name].get<std::string>();
}

std::size_t page_size_arg(const json& args) {
    auto n = args.at("page_size").get<std::int64_t>();
    if (n < 1 || n > 100)
        throw ToolError(ErrorType::invalid_argument, "page_size must be between 1 and 100", {{"parameter", "page_size"}});
    return static_cast<std::size_t>(n);
}

} // namespace

void require_well_formed_id(const std::string& id, std::string_view parameter) {
    bool ok = !id.empty() && id.size() <= 128 && std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '-' || c == '_' || c == '.';
    });
    if (!ok)
        throw ToolError(ErrorType::invalid_argument, std::string(parameter) + " is not a well-formed id",
                        {{"parameter", parameter}});
}

KfpAgent::KfpAgent(PipelineBackend& backend, Options options) : backend_(backend), options_(std::move(options)) {}

void KfpAgent::require_readable(const UserContext& ctx, const std::string& ns) const {
    if (ns != ctx.namespace_name && ns != shared_namespace)
        throw ToolError(ErrorType::permission_denied, "namespace " + ns + " is not accessible to this user",
                        {{"namespace", ns}});
}

void KfpAgent::require_writable(const UserContext& ctx, const std::string& ns) const {
    if (ns != ctx.namespace_name)
        throw ToolError(ErrorType::permission_denied, "namespace " + ns + " is not writable by this user",
                        {{"namespace", ns}});
}

Pipeline KfpAgent::load_pipeline(const UserContext& ctx, const std::string& pipeline_id) {
    require_well_formed_id(pipeline_id, "pipeline_id");
    auto p = backend_.get_pipeline(pipeline_id);
    if (!p) throw ToolError(ErrorType::not_found, "no pipeline " + pipeline_id, {{"pipeline_id", pipeline_id}});
    require_readable(ctx, p->namespace_name);
    return std::move(*p);
}

std::pair<std::size_t, std::size_t> KfpAgent::page_window(const PageRequest& page, std::size_t total) const {
    if (page.page_size < 1 || page.page_size > options_.max_page_size)
        throw ToolError(ErrorType::invalid_argument,
                        "page_size must be between 1 and " + std::to_string(options_.max_page_size),
                        {{"parameter", "page_size"}});
    std::size_t offset = 0;
    if (page.page_token && !page.page_token->empty()) {
        const auto& t = *page.page_token;
        constexpr std::string_view prefix = "offset:";
        auto bad = [&] {
            return ToolError(ErrorType::invalid_argument, "invalid page_token '" + t + "'", {{"parameter", "page_token"}});
        };
        if (t.compare(0, prefix.size(), prefix) != 0) throw bad();
        auto digits = std::string_view(t).substr(prefix.size());
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), offset);
        if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size() || offset > total) throw bad();
    }
    return {offset, std::min(total, offset + page.page_size)};
}

json KfpAgent::get_pipelines(const UserContext& ctx, const std::string& search, const std::optional<std::string>& ns,
                             PageRequest page) {
    auto namespace_name = ns.value_or(ctx.namespace_name);
    require_readable(ctx, namespace_name);
    auto needle = lower(search);
    std::vector<Pipeline> matches;
    for (auto& p : backend_.list_pipelines(namespace_name))
        if (contains_ci(p.name, needle) || contains_ci(p.description, needle)) matches.push_back(std::move(p));
    std::sort(matches.begin(), matches.end(), [](const Pipeline& a, const Pipeline& b) {
        return a.created_at != b.created_at ? a.created_at > b.created_at : a.id < b.id;
    });
    auto [begin, end] = page_window(page, matches.size());
    json pipelines = json::array();
    for (auto i = begin; i < end; ++i) pipelines.push_back(pipeline_summary(matches[i]));
    json out{{"total_pipelines", end - begin},
             {"total_available", matches.size()},
             {"namespace", namespace_name},
             {"namespace_type", namespace_name == shared_namespace ? "shared" : "user"},
             {"pipelines", pipelines}};
    if (end < matches.size()) out["next_page_token"] = "offset:" + std::to_string(end);
    return out;
}

json KfpAgent::get_pipeline_details(const UserContext& ctx, const std::string& pipeline_id) {
    auto p = load_pipeline(ctx, pipeline_id);
    auto out = pipeline_summary(p);
    if (const auto* latest = p.latest_version()) out["latest_version_id"] = latest->version_id;
    return out;
}

json KfpAgent::get_pipeline_version_details(const UserContext& ctx, const std::string& pipeline_id,
                                            const std::optional<std::string>& version_id) {
    auto p = load_pipeline(ctx, pipeline_id);
    const PipelineVersion* v = nullptr;
    if (version_id) {
        require_well_formed_id(*version_id, "version_id");
        v = p.find_version(*version_id);
    } else {
        v = p.latest_version();
    }
    if (!v)
        throw ToolError(ErrorType::not_found, "pipeline " + pipeline_id + " has no version " + version_id.value_or("(latest)"),
                        {{"pipeline_id", pipeline_id}, {"version_id", version_id ? json(*version_id) : json(nullptr)}});
    json components = json::object();
    for (const auto& c : v->parsed.components)
        components[c.name] = {{"inputDefinitions", {{"parameters", parameters_json(c.parameters)}}}};
    json order = json::array();
    for (const auto& c : v->parsed.components) order.push_back(c.name);
    return {{"pipeline_id", p.id},
            {"pipeline_name", p.name},
            {"version_id", v->version_id},
            {"version_name", v->name},
            {"pipeline_spec", {{"sha256", sha256_hex(v->pipeline_spec)}, {"bytes", v->pipeline_spec.size()}}},
            {"pipeline_parameters", parameters_json(v->parsed.root_parameters)},
            {"components", components},
            {"execution_order", order}};
}

std::string KfpAgent::get_pipeline_id(const UserContext& ctx, const std::string& name,
                                      const std::optional<std::string>& ns) {
    if (name.empty()) throw ToolError(ErrorType::invalid_argument, "name is empty", {{"parameter", "name"}});
    auto namespace_name = ns.value_or(ctx.namespace_name);
    require_readable(ctx, namespace_name);
    std::vector<std::string> ids;
    for (const auto& p : backend_.list_pipelines(namespace_name))
        if (p.name == name) ids.push_back(p.id);
    if (ids.empty())
        throw ToolError(ErrorType::not_found, "no pipeline named '" + name + "' in namespace " + namespace_name,
                        {{"name", name}, {"namespace", namespace_name}});
    if (ids.size() > 1)
        throw ToolError(ErrorType::invalid_argument, "pipeline name '" + name + "' is ambiguous in namespace " + namespace_name,
                        {{"parameter", "name"}, {"candidates", ids}});
    return ids.front();
}

Experiment KfpAgent::create_experiment(const UserContext& ctx, const std::string& name,
                                       const std::optional<std::string>& ns, const std::string& description) {
    if (name.empty()) throw ToolError(ErrorType::invalid_argument, "name is empty", {{"parameter", "name"}});
    auto namespace_name = ns.value_or(ctx.namespace_name);
    require_writable(ctx, namespace_name);
    return backend_.create_experiment(name, namespace_name, description);
}

Run KfpAgent::run_pipeline(const UserContext& ctx, const std::string& experiment_id, const std::string& job_name,
                           const json& params, const std::string& pipeline_id,
                           const std::optional<std::string>& version_id) {
    require_well_formed_id(experiment_id, "experiment_id");
    if (job_name.empty()) throw ToolError(ErrorType::invalid_argument, "job_name is empty", {{"parameter", "job_name"}});
    auto exp = backend_.get_experiment(experiment_id);
    if (!exp) throw ToolError(ErrorType::not_found, "no experiment " + experiment_id, {{"experiment_id", experiment_id}});
    require_writable(ctx, exp->namespace_name);
    auto p = load_pipeline(ctx, pipeline_id);
    const PipelineVersion* v = version_id ? p.find_version(*version_id) : p.latest_version();
    if (!v)
        throw ToolError(ErrorType::not_found, "pipeline " + pipeline_id + " has no version " + version_id.value_or("(latest)"),
                        {{"pipeline_id", pipeline_id}});
    auto merged = merge_parameters(v->parsed.root_parameters, params);
    return backend_.create_run({experiment_id, job_name, p.id, v->version_id, merged, exp->namespace_name});
}

json KfpAgent::list_runs(const UserContext& ctx, const RunFilter& filter, PageRequest page) {
    auto namespace_name = filter.ns.value_or(ctx.namespace_name);
    require_readable(ctx, namespace_name);
    std::optional<RunState> status;
    if (filter.status && !filter.status->empty()) {
        try {
            status = run_state_from_string(*filter.status);
        } catch (const std::invalid_argument&) {
            throw ToolError(ErrorType::invalid_argument, "unknown status '" + *filter.status + "'",
                            {{"parameter", "status"}, {"allowed", {"PENDING", "RUNNING", "SUCCEEDED", "FAILED"}}});
        }
    }
    if (filter.experiment_id) require_well_formed_id(*filter.experiment_id, "experiment_id");
    auto needle = lower(filter.search.value_or(""));

    std::vector<Run> matches;
    for (auto& r : backend_.list_runs(namespace_name)) {
        if (filter.experiment_id && r.experiment_id != *filter.experiment_id) continue;
        if (status && r.state != *status) continue;
        if (!contains_ci(r.job_name, needle)) continue;
        matches.push_back(std::move(r));
    }
    std::sort(matches.begin(), matches.end(), [](const Run& a, const Run& b) {
        return a.created_at != b.created_at ? a.created_at > b.created_at : a.run_id < b.run_id;
    });
    auto [begin, end] = page_window(page, matches.size());
    json runs = json::array();
    for (auto i = begin; i < end; ++i) runs.push_back(matches[i].to_json());
    json out{{"total_available", matches.size()}, {"namespace", namespace_name}, {"runs", runs}};
    if (end < matches.size()) out["next_page_token"] = "offset:" + std::to_string(end);
    return out;
}

json KfpAgent::get_run_details(const UserContext& ctx, const std::string& run_id) {
    require_well_formed_id(run_id, "run_id");
    auto run = backend_.get_run(run_id);
    if (!run) throw ToolError(ErrorType::not_found, "no run " + run_id, {{"run_id", run_id}});
    require_readable(ctx, run->namespace_name);
    auto out = run->to_json();

    auto p = backend_.get_pipeline(run->pipeline_id);
    const PipelineVersion* v = p ? p->find_version(run->version_id) : nullptr;
    out["pipeline"] = {{"id", run->pipeline_id},
                       {"name", p ? json(p->name) : json(nullptr)},
                       {"version_id", run->version_id},
                       {"version_name", v ? json(v->name) : json(nullptr)}};

    json steps = json::array();
    if (p && v) {
        auto dir = minio::artifact_dir(p->name) + "/" + run->run_id + "/";
        bool reached_failure = false;
        for (std::size_t i = 0; i < v->parsed.components.size(); ++i) {
            const auto& name = v->parsed.components[i].name;
            std::string state;
            bool has_log = false;
            switch (run->state) {
            case RunState::pending: state = "PENDING"; break;
            case RunState::running: state = i == 0 ? "RUNNING" : "PENDING"; break;
            case RunState::succeeded:
                state = "SUCCEEDED";
                has_log = true;
                break;
            case RunState::failed:
                if (reached_failure) {
                    state = "SKIPPED";
                } else if (run->failed_step && *run->failed_step == name) {
                    state = "FAILED";
                    has_log = true;
                    reached_failure = true;
                } else {
                    state = "SUCCEEDED";
                    has_log = true;
                }
                break;
            }
            json step{{"name", name}, {"state", state}};
            step["log"] = has_log ? json{{"bucket", options_.artifact_bucket}, {"key", dir + "step-" + name + ".log"}}
                                  : json(nullptr);
            steps.push_back(std::move(step));
        }
    }
    out["steps"] = steps;
    return out;
}

void register_kfp_tools(orch::ToolRegistry& registry, KfpAgent& agent) {
    using llm::ParamType;
    using orch::AgentTag;
    const llm::ParamSpec page_size{"page_size", ParamType::integer, false, json(agent.options().default_page_size),
                                   "Results per page, 1-100"};
    const llm::ParamSpec page_token{"page_token", ParamType::string, false, std::nullopt,
                                    "next_page_token from a previous call"};
    const llm::ParamSpec ns{"namespace", ParamType::string, false, std::nullopt,
                            "Namespace; defaults to the user's own. \"shared\" holds pipelines visible to everyone"};

    registry.register_tool(
        {"get_pipelines",
         "Search pipelines by name or description within a namespace, newest first, with pagination.",
         {{"search", ParamType::string, false, json(""), "Case-insensitive substring; empty matches all"},
          ns, page_size, page_token}},
        [&agent](const json& args, const UserContext& ctx) {
            return agent.get_pipelines(ctx, args["search"].get<std::string>(), opt_string(args, "namespace"),
                                       {page_size_arg(args), opt_string(args, "page_token")});
        },
        AgentTag::kfp);

    registry.register_tool(
        {"get_pipeline_details",
         "Pipeline metadata: description, creation time and version list.",
         {{"pipeline_id", ParamType::string, true, std::nullopt, "Pipeline id"}}},
        [&agent](const json& args, const UserContext& ctx) {
            return agent.get_pipeline_details(ctx, args["pipeline_id"].get<std::string>());
        },
        AgentTag::kfp);

    registry.register_tool(
        {"get_pipeline_version_details",
         "Components of a pipeline version with each input parameter's type and default value.",
         {{"pipeline_id", ParamType::string, true, std::nullopt, "Pipeline id"},
          {"version_id", ParamType::string, false, std::nullopt, "Version id; omit for the latest"}}},
        [&agent](const json& args, const UserContext& ctx) {
            return agent.get_pipeline_version_details(ctx, args["pipeline_id"].get<std::string>(),
                                                      opt_string(args, "version_id"));
        },
        AgentTag::kfp);

    registry.register_tool(
        {"get_pipeline_id",
         "Resolve a pipeline's exact name to its id.",
         {{"name", ParamType::string, true, std::nullopt, "Exact pipeline name"}, ns}},
        [&agent](const json& args, const UserContext& ctx) {
            auto name = args["name"].get<std::string>();
            return json{{"name", name}, {"pipeline_id", agent.get_pipeline_id(ctx, name, opt_string(args, "namespace"))}};
        },
        AgentTag::kfp);

    registry.register_tool(
        {"create_experiment",
         "Create an experiment to group pipeline runs.",
         {{"name", ParamType::string, true, std::nullopt, "Experiment name, unique within the namespace"},
          ns,
          {"description", ParamType::string, false, json(""), "Free text"}}},
        [&agent](const json& args, const UserContext& ctx) {
            return agent
                .create_experiment(ctx, args["name"].get<std::string>(), opt_string(args, "namespace"),
                                   args["description"].get<std::string>())
                .to_json();
        },
        AgentTag::kfp);

    registry.register_tool(
        {"run_pipeline",
         "Start a pipeline run in an experiment. Parameters not given take the version's defaults.",
         {{"experiment_id", ParamType::string, true, std::nullopt, "Experiment id"},
          {"job_name", ParamType::string, true, std::nullopt, "Name for the run"},
          {"pipeline_id", ParamType::string, true, std::nullopt, "Pipeline id"},
          {"version_id", ParamType::string, false, std::nullopt, "Version id; omit for the latest"},
          {"params", ParamType::object, false, json::object(), "Pipeline parameter overrides"}}},
        [&agent](const json& args, const UserContext& ctx) {
            return agent
                .run_pipeline(ctx, args["experiment_id"].get<std::string>(), args["job_name"].get<std::string>(),
                              args["params"], args["pipeline_id"].get<std::string>(), opt_string(args, "version_id"))
                .to_json();
        },
        AgentTag::kfp);

    registry.register_tool(
        {"list_runs",
         "List runs newest first, filtered by experiment, status and job-name search.",
         {ns,
          {"experiment_id", ParamType::string, false, std::nullopt, "Only runs of this experiment"},
          {"status", ParamType::string, false, std::nullopt, "PENDING, RUNNING, SUCCEEDED or FAILED"},
          {"search", ParamType::string, false, std::nullopt, "Case-insensitive substring of the job name"},
          page_size,
          page_token}},
        [&agent](const json& args, const UserContext& ctx) {
            return agent.list_runs(ctx,
                                   {opt_string(args, "namespace"), opt_string(args, "experiment_id"),
                                    opt_string(args, "status"), opt_string(args, "search")},
                                   {page_size_arg(args), opt_string(args, "page_token")});
        },
        AgentTag::kfp);

    registry.register_tool(
        {"get_run_details",
         "A run's state, parameters, pipeline and per-step status with log locations.",
         {{"run_id", ParamType::string, true, std::nullopt, "Run id"}}},
        [&agent](const json& args, const UserContext& ctx) {
            return agent.get_run_details(ctx, args["run_id"].get<std::string>());
        },
        AgentTag::kfp);
}

} // namespace swarm::kfp
