#include "swarm/kfp/types.hpp"

#include "swarm/orchestrator/error_envelope.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace swarm::kfp {

std::string_view to_string(ParameterType type) {
    switch (type) {
    case ParameterType::number_double: return "NUMBER_DOUBLE";
    case ParameterType::number_integer: return "NUMBER_INTEGER";
    case ParameterType::string: return "STRING";
    case ParameterType::boolean: return "BOOLEAN";
    case ParameterType::list: return "LIST";
    case ParameterType::structure: return "STRUCT";
    }
    return "STRING";
}

ParameterType parameter_type_from_string(std::string_view text) {
    if (text == "NUMBER_DOUBLE") return ParameterType::number_double;
    if (text == "NUMBER_INTEGER") return ParameterType::number_integer;
    if (text == "STRING") return ParameterType::string;
    if (text == "BOOLEAN") return ParameterType::boolean;
    if (text == "LIST") return ParameterType::list;
    if (text == "STRUCT") return ParameterType::structure;
    throw std::invalid_argument("unknown parameterType: " + std::string(text));
}

bool conforms(const json& value, ParameterType type) {
    switch (type) {
    case ParameterType::number_double: return value.is_number();
    case ParameterType::number_integer: return value.is_number_integer();
    case ParameterType::string: return value.is_string();
    case ParameterType::boolean: return value.is_boolean();
    case ParameterType::list: return value.is_array();
    case ParameterType::structure: return value.is_object();
    }
    return false;
}

json ParameterDef::to_json() const {
    json j{{"parameterType", to_string(type)}};
    if (default_value) j["defaultValue"] = *default_value;
    return j;
}

const ParameterDef* find_parameter(const ParameterList& params, std::string_view name) {
    for (const auto& p : params)
        if (p.name == name) return &p;
    return nullptr;
}

namespace {

ParameterList parse_parameters(const json& definitions, const std::string& where) {
    ParameterList out;
    if (!definitions.is_object()) return out;
    auto params = definitions.find("parameters");
    if (params == definitions.end()) return out;
    if (!params->is_object()) throw std::invalid_argument(where + ": parameters must be an object");
    for (const auto& [name, def] : params->items()) {
        ParameterDef p{name, parameter_type_from_string(def.at("parameterType").get<std::string>()), std::nullopt};
        if (auto d = def.find("defaultValue"); d != def.end()) {
            // IR serializers write 1.0 as 1; a double parameter accepts any number.
            if (!conforms(*d, p.type))
                throw std::invalid_argument(where + ": default of " + name + " is not " + std::string(to_string(p.type)));
            p.default_value = *d;
        }
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace

ParsedSpec parse_pipeline_spec(std::string_view spec_text) {
    json spec;
    try {
        spec = json::parse(spec_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("pipeline spec is not JSON: ") + e.what());
    }
    if (!spec.is_object()) throw std::invalid_argument("pipeline spec is not an object");

    ParsedSpec out;
    const auto& root = spec.contains("root") ? spec["root"] : json::object();
    if (root.contains("inputDefinitions")) out.root_parameters = parse_parameters(root["inputDefinitions"], "root");

    std::map<std::string, ComponentSpec> components;
    if (spec.contains("components")) {
        for (const auto& [name, body] : spec["components"].items()) {
            ComponentSpec c{name, {}};
            if (body.contains("inputDefinitions")) c.parameters = parse_parameters(body["inputDefinitions"], name);
            components.emplace(name, std::move(c));
        }
    }

    // Kahn's algorithm over root.dag.tasks; std::set keeps ready tasks ordered by name.
    std::map<std::string, std::string> task_component;
    std::map<std::string, std::set<std::string>> deps;
    if (root.contains("dag") && root["dag"].contains("tasks")) {
        for (const auto& [task, body] : root["dag"]["tasks"].items()) {
            task_component[task] = body.at("componentRef").at("name").get<std::string>();
            auto& d = deps[task];
            if (body.contains("dependentTasks"))
                for (const auto& dep : body["dependentTasks"]) d.insert(dep.get<std::string>());
        }
    }
    std::set<std::string> emitted;
    std::set<std::string> done;
    while (done.size() < task_component.size()) {
        std::string next;
        for (const auto& [task, d] : deps) {
            if (done.contains(task)) continue;
            if (std::all_of(d.begin(), d.end(), [&](const auto& x) { return done.contains(x) || !deps.contains(x); })) {
                next = task;
                break;
            }
        }
        if (next.empty()) throw std::invalid_argument("pipeline DAG has a dependency cycle");
        done.insert(next);
        const auto& comp = task_component[next];
        auto it = components.find(comp);
        if (it == components.end()) throw std::invalid_argument("task " + next + " references unknown component " + comp);
        if (emitted.insert(comp).second) out.components.push_back(it->second);
    }
    for (const auto& [name, c] : components)
        if (!emitted.contains(name)) out.components.push_back(c);
    return out;
}

const PipelineVersion* Pipeline::latest_version() const {
    const PipelineVersion* best = nullptr;
    for (const auto& v : versions)
        if (!best || v.created_at > best->created_at || (v.created_at == best->created_at && v.version_id > best->version_id))
            best = &v;
    return best;
}

const PipelineVersion* Pipeline::find_version(std::string_view version_id) const {
    for (const auto& v : versions)
        if (v.version_id == version_id) return &v;
    return nullptr;
}

json Experiment::to_json() const {
    return {{"id", id},
            {"name", name},
            {"namespace", namespace_name},
            {"description", description},
            {"created_at", format_timestamp(created_at)}};
}

std::string_view to_string(RunState state) {
    switch (state) {
    case RunState::pending: return "PENDING";
    case RunState::running: return "RUNNING";
    case RunState::succeeded: return "SUCCEEDED";
    case RunState::failed: return "FAILED";
    }
    return "PENDING";
}

RunState run_state_from_string(std::string_view text) {
    if (text == "PENDING") return RunState::pending;
    if (text == "RUNNING") return RunState::running;
    if (text == "SUCCEEDED") return RunState::succeeded;
    if (text == "FAILED") return RunState::failed;
    throw std::invalid_argument("unknown run state: " + std::string(text));
}

bool is_terminal(RunState state) { return state == RunState::succeeded || state == RunState::failed; }

bool legal_transition(RunState from, RunState to) {
    if (from == RunState::pending) return to == RunState::running;
    if (from == RunState::running) return is_terminal(to);
    return false;
}

json Run::to_json() const {
    json j{{"run_id", run_id},
           {"job_name", job_name},
           {"experiment_id", experiment_id},
           {"pipeline_id", pipeline_id},
           {"version_id", version_id},
           {"namespace", namespace_name},
           {"params", params},
           {"state", to_string(state)},
           {"created_at", format_timestamp(created_at)}};
    j["finished_at"] = finished_at ? json(format_timestamp(*finished_at)) : json(nullptr);
    j["error_detail"] = error_detail ? json(*error_detail) : json(nullptr);
    j["failed_step"] = failed_step ? json(*failed_step) : json(nullptr);
    return j;
}

json merge_parameters(const ParameterList& declared, const json& explicit_params) {
    if (!explicit_params.is_object())
        throw ToolError(ErrorType::invalid_argument, "params must be an object", {{"parameter", "params"}});
    json out = json::object();
    for (const auto& p : declared)
        if (p.default_value) out[p.name] = *p.default_value;
    for (const auto& [key, value] : explicit_params.items()) {
        const auto* def = find_parameter(declared, key);
        if (!def) {
            json known = json::array();
            for (const auto& p : declared) known.push_back(p.name);
            throw ToolError(ErrorType::invalid_argument, "unknown pipeline parameter '" + key + "'",
                            {{"parameter", key}, {"known_parameters", known}});
        }
        if (!conforms(value, def->type))
            throw ToolError(ErrorType::invalid_argument,
                            "parameter '" + key + "' expects " + std::string(to_string(def->type)) + ", got " +
                                value.dump(),
                            {{"parameter", key}, {"expected", to_string(def->type)}, {"got", value}});
        out[key] = value;
    }
    return out;
}

json pipeline_to_json(const Pipeline& p) {
    json versions = json::array();
    for (const auto& v : p.versions)
        versions.push_back({{"version_id", v.version_id},
                            {"name", v.name},
                            {"description", v.description},
                            {"created_at", format_timestamp(v.created_at)},
                            {"pipeline_spec", json::parse(v.pipeline_spec)}});
    return {{"id", p.id},
            {"name", p.name},
            {"description", p.description},
            {"namespace", p.namespace_name},
            {"created_at", format_timestamp(p.created_at)},
            {"versions", versions}};
}

Pipeline pipeline_from_json(const json& j) {
    Pipeline p;
    p.id = j.at("id").get<std::string>();
    p.name = j.at("name").get<std::string>();
    p.description = j.value("description", "");
    p.namespace_name = j.at("namespace").get<std::string>();
    p.created_at = parse_timestamp(j.at("created_at").get<std::string>());
    for (const auto& v : j.at("versions")) {
        PipelineVersion version;
        version.version_id = v.at("version_id").get<std::string>();
        version.name = v.value("name", version.version_id);
        version.description = v.value("description", "");
        version.created_at = parse_timestamp(v.at("created_at").get<std::string>());
        const auto& spec = v.at("pipeline_spec");
        version.pipeline_spec = spec.is_string() ? spec.get<std::string>() : spec.dump();
        version.parsed = parse_pipeline_spec(version.pipeline_spec);
        p.versions.push_back(std::move(version));
    }
    if (p.versions.empty()) throw std::invalid_argument("pipeline " + p.id + " has no versions");
    return p;
}

Experiment experiment_from_json(const json& j) {
    return {j.at("id").get<std::string>(), j.at("name").get<std::string>(), j.at("namespace").get<std::string>(),
            j.value("description", ""), parse_timestamp(j.at("created_at").get<std::string>())};
}

Run run_from_json(const json& j) {
    Run r;
    r.run_id = j.at("run_id").get<std::string>();
    r.job_name = j.value("job_name", r.run_id);
    r.experiment_id = j.at("experiment_id").get<std::string>();
    r.pipeline_id = j.at("pipeline_id").get<std::string>();
    r.version_id = j.at("version_id").get<std::string>();
    r.namespace_name = j.at("namespace").get<std::string>();
    r.params = j.value("params", json::object());
    r.state = run_state_from_string(j.value("state", "PENDING"));
    r.created_at = parse_timestamp(j.at("created_at").get<std::string>());
    if (j.contains("finished_at") && !j["finished_at"].is_null())
        r.finished_at = parse_timestamp(j["finished_at"].get<std::string>());
    if (j.contains("error_detail") && !j["error_detail"].is_null()) r.error_detail = j["error_detail"].get<std::string>();
    if (j.contains("failed_step") && !j["failed_step"].is_null()) r.failed_step = j["failed_step"].get<std::string>();
    if (is_terminal(r.state) != r.finished_at.has_value())
        throw std::invalid_argument("run " + r.run_id + ": finished_at must be set exactly for terminal runs");
    return r;
}

} // namespace swarm::kfp
