#pragma once

#include "swarm/time.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace swarm::kfp {

using nlohmann::json;

enum class ParameterType { number_double, number_integer, string, boolean, list, structure };

/// Wire spelling: NUMBER_DOUBLE, NUMBER_INTEGER, STRING, BOOLEAN, LIST, STRUCT.
std::string_view to_string(ParameterType type);
/// Throws std::invalid_argument for an unknown spelling.
ParameterType parameter_type_from_string(std::string_view text);

/// NUMBER_DOUBLE takes any JSON number, NUMBER_INTEGER only integers.
bool conforms(const json& value, ParameterType type);

struct ParameterDef {
    std::string name;
    ParameterType type = ParameterType::string;
    std::optional<json> default_value;

    json to_json() const;  // {"parameterType": …, "defaultValue": …}
};

using ParameterList = std::vector<ParameterDef>;

const ParameterDef* find_parameter(const ParameterList& params, std::string_view name);

struct ComponentSpec {
    std::string name;  // e.g. comp-train-svm
    ParameterList parameters;
};

/// What the agent reads out of a compiled pipeline spec: the pipeline-level
/// inputs a run may set, and the components in execution order.
struct ParsedSpec {
    ParameterList root_parameters;
    std::vector<ComponentSpec> components;
};

/// Reads `root.inputDefinitions.parameters` and `components.*.inputDefinitions.parameters`
/// of a pipeline IR document. Components come in DAG order (`root.dag.tasks`
/// with `dependentTasks`, ties by task name); unreferenced ones follow by
/// name. Throws std::invalid_argument on malformed input, a dependency cycle,
/// or a default that does not conform to its declared type.
ParsedSpec parse_pipeline_spec(std::string_view spec_text);

struct PipelineVersion {
    std::string version_id;
    std::string name;
    std::string description;
    Timestamp created_at{};
    std::string pipeline_spec;  // serialized IR, never sent to the LLM
    ParsedSpec parsed;
};

struct Pipeline {
    std::string id;
    std::string name;
    std::string description;
    std::string namespace_name;
    Timestamp created_at{};
    std::vector<PipelineVersion> versions;

    /// Newest by created_at, ties broken by version id. Null when there are none.
    const PipelineVersion* latest_version() const;
    const PipelineVersion* find_version(std::string_view version_id) const;
};

struct Experiment {
    std::string id;
    std::string name;
    std::string namespace_name;
    std::string description;
    Timestamp created_at{};

    json to_json() const;
};

enum class RunState { pending, running, succeeded, failed };

std::string_view to_string(RunState state);
/// Throws std::invalid_argument for an unknown spelling.
RunState run_state_from_string(std::string_view text);
bool is_terminal(RunState state);
/// PENDING→RUNNING, RUNNING→SUCCEEDED and RUNNING→FAILED; nothing else.
bool legal_transition(RunState from, RunState to);

struct Run {
    std::string run_id;
    std::string job_name;
    std::string experiment_id;
    std::string pipeline_id;
    std::string version_id;
    std::string namespace_name;
    json params = json::object();
    RunState state = RunState::pending;
    Timestamp created_at{};
    std::optional<Timestamp> finished_at;
    std::optional<std::string> error_detail;
    std::optional<std::string> failed_step;

    json to_json() const;
};

/// Defaults of `declared` overridden by `explicit_params`. Throws
/// ToolError{invalid_argument} naming the first unknown key or ill-typed value.
json merge_parameters(const ParameterList& declared, const json& explicit_params);

// Storage round trips used by fixtures and backend snapshots.
json pipeline_to_json(const Pipeline& p);
Pipeline pipeline_from_json(const json& j);
Experiment experiment_from_json(const json& j);
Run run_from_json(const json& j);

} // namespace swarm::kfp
