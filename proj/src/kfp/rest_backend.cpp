#include "swarm/kfp/rest_backend.hpp"

#include "swarm/orchestrator/error_envelope.hpp"

#include <httplib.h>

namespace swarm::kfp {

namespace {

constexpr std::string_view api = "/apis/v2beta1";

Timestamp timestamp_or_epoch(const json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_string()) return {};
    try {
        return parse_timestamp(j[field].get<std::string>());
    } catch (const std::invalid_argument&) {
        return {};
    }
}

std::string str(const json& j, const char* field) {
    return j.contains(field) && j[field].is_string() ? j[field].get<std::string>() : std::string();
}

Experiment to_experiment(const json& j) {
    return {str(j, "experiment_id"), str(j, "display_name"), str(j, "namespace"), str(j, "description"),
            timestamp_or_epoch(j, "created_at")};
}

Run to_run(const json& j) {
    Run r;
    r.run_id = str(j, "run_id");
    r.job_name = str(j, "display_name");
    r.experiment_id = str(j, "experiment_id");
    if (j.contains("pipeline_version_reference")) {
        r.pipeline_id = str(j["pipeline_version_reference"], "pipeline_id");
        r.version_id = str(j["pipeline_version_reference"], "pipeline_version_id");
    }
    if (j.contains("runtime_config") && j["runtime_config"].contains("parameters"))
        r.params = j["runtime_config"]["parameters"];
    r.state = run_state_from_v2beta1(str(j, "state"));
    r.created_at = timestamp_or_epoch(j, "created_at");
    if (is_terminal(r.state)) r.finished_at = timestamp_or_epoch(j, "finished_at");
    if (j.contains("error") && j["error"].contains("message")) r.error_detail = str(j["error"], "message");
    return r;
}

} // namespace

RunState run_state_from_v2beta1(std::string_view state) {
    if (state.empty() || state == "RUNTIME_STATE_UNSPECIFIED" || state == "PENDING") return RunState::pending;
    if (state == "RUNNING" || state == "PAUSED" || state == "CANCELING") return RunState::running;
    if (state == "SUCCEEDED") return RunState::succeeded;
    return RunState::failed;
}

KfpRestBackend::KfpRestBackend(Endpoint endpoint, std::string bearer_token, std::chrono::seconds timeout)
    : endpoint_(std::move(endpoint)), bearer_token_(std::move(bearer_token)), timeout_(timeout) {}

std::optional<json> KfpRestBackend::call(const std::string& method, const std::string& path, const json* body) {
    httplib::Client client(endpoint_.origin());
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    httplib::Request req;
    req.method = method;
    req.path = endpoint_.base_path + std::string(api) + path;
    if (!bearer_token_.empty()) req.headers.emplace("Authorization", "Bearer " + bearer_token_);
    if (body) {
        req.body = body->dump();
        req.headers.emplace("Content-Type", "application/json");
    }
    auto result = client.send(req);
    if (!result)
        throw ToolError(ErrorType::backend_unavailable, "pipeline API unreachable: " + httplib::to_string(result.error()));
    if (result->status == 404) return std::nullopt;
    auto detail = method + " " + path + ": HTTP " + std::to_string(result->status);
    if (result->status == 400 || result->status == 409) throw ToolError(ErrorType::invalid_argument, detail + " " + result->body);
    if (result->status == 401 || result->status == 403) throw ToolError(ErrorType::permission_denied, detail);
    if (result->status / 100 != 2) throw ToolError(ErrorType::backend_unavailable, detail);
    if (result->body.empty()) return json::object();
    try {
        return json::parse(result->body);
    } catch (const json::parse_error&) {
        throw ToolError(ErrorType::backend_unavailable, detail + ": response is not JSON");
    }
}

std::vector<json> KfpRestBackend::list_all(const std::string& path, const std::string& field,
                                           const std::string& namespace_name) {
    std::vector<json> out;
    std::string token;
    do {
        auto query = path + "?page_size=100&namespace=" + url_encode(namespace_name);
        if (!token.empty()) query += "&page_token=" + url_encode(token);
        auto page = call("GET", query);
        if (!page) break;
        for (const auto& item : page->value(field, json::array())) out.push_back(item);
        token = str(*page, "next_page_token");
    } while (!token.empty());
    return out;
}

Pipeline KfpRestBackend::to_pipeline(const json& j, const std::string& fallback_namespace) {
    Pipeline p;
    p.id = str(j, "pipeline_id");
    p.name = str(j, "display_name");
    p.description = str(j, "description");
    p.namespace_name = str(j, "namespace").empty() ? fallback_namespace : str(j, "namespace");
    p.created_at = timestamp_or_epoch(j, "created_at");
    std::string token;
    do {
        auto query = "/pipelines/" + url_encode(p.id) + "/versions?page_size=100";
        if (!token.empty()) query += "&page_token=" + url_encode(token);
        auto page = call("GET", query);
        if (!page) break;
        for (const auto& v : page->value("pipeline_versions", json::array())) {
            PipelineVersion version;
            version.version_id = str(v, "pipeline_version_id");
            version.name = str(v, "display_name");
            version.description = str(v, "description");
            version.created_at = timestamp_or_epoch(v, "created_at");
            version.pipeline_spec = v.value("pipeline_spec", json::object()).dump();
            try {
                version.parsed = parse_pipeline_spec(version.pipeline_spec);
            } catch (const std::invalid_argument&) {
                // Unparseable specs still list; they just expose no parameters.
            }
            p.versions.push_back(std::move(version));
        }
        token = str(*page, "next_page_token");
    } while (!token.empty());
    return p;
}

std::vector<Pipeline> KfpRestBackend::list_pipelines(const std::string& namespace_name) {
    std::vector<Pipeline> out;
    for (const auto& j : list_all("/pipelines", "pipelines", namespace_name)) out.push_back(to_pipeline(j, namespace_name));
    return out;
}

std::optional<Pipeline> KfpRestBackend::get_pipeline(const std::string& pipeline_id) {
    auto j = call("GET", "/pipelines/" + url_encode(pipeline_id));
    if (!j) return std::nullopt;
    return to_pipeline(*j, {});
}

std::vector<Experiment> KfpRestBackend::list_experiments(const std::string& namespace_name) {
    std::vector<Experiment> out;
    for (const auto& j : list_all("/experiments", "experiments", namespace_name)) out.push_back(to_experiment(j));
    return out;
}

std::optional<Experiment> KfpRestBackend::get_experiment(const std::string& experiment_id) {
    auto j = call("GET", "/experiments/" + url_encode(experiment_id));
    if (!j) return std::nullopt;
    return to_experiment(*j);
}

Experiment KfpRestBackend::create_experiment(const std::string& name, const std::string& namespace_name,
                                             const std::string& description) {
    json body{{"display_name", name}, {"description", description}, {"namespace", namespace_name}};
    auto j = call("POST", "/experiments", &body);
    if (!j) throw ToolError(ErrorType::backend_unavailable, "experiment endpoint missing");
    return to_experiment(*j);
}

Run KfpRestBackend::create_run(const RunRequest& request) {
    json body{{"display_name", request.job_name},
              {"experiment_id", request.experiment_id},
              {"pipeline_version_reference",
               {{"pipeline_id", request.pipeline_id}, {"pipeline_version_id", request.version_id}}},
              {"runtime_config", {{"parameters", request.params}}}};
    auto j = call("POST", "/runs", &body);
    if (!j) throw ToolError(ErrorType::not_found, "pipeline or experiment not found");
    auto run = to_run(*j);
    run.namespace_name = request.namespace_name;
    return run;
}

std::vector<Run> KfpRestBackend::list_runs(const std::string& namespace_name) {
    std::vector<Run> out;
    for (const auto& j : list_all("/runs", "runs", namespace_name)) {
        auto run = to_run(j);
        run.namespace_name = namespace_name;
        out.push_back(std::move(run));
    }
    return out;
}

std::optional<Run> KfpRestBackend::get_run(const std::string& run_id) {
    auto j = call("GET", "/runs/" + url_encode(run_id));
    if (!j) return std::nullopt;
    auto run = to_run(*j);
    if (auto exp = get_experiment(run.experiment_id)) run.namespace_name = exp->namespace_name;
    return run;
}

} // namespace swarm::kfp
