#pragma once

// JSON (de)serialization of distributions. Masses may be numbers or decimal
// strings; matrices are nested row arrays or flat row-major with "shape".

#include <json.hpp>

#include <string>

#include "synth/dist.hpp"

namespace synth {

using json = nlohmann::json;

Pmf pmf_from_json(const json& j);
JointPmf joint_from_json(const json& j);
Channel channel_from_json(const json& j);

json to_json(const Pmf& p);
json to_json(const JointPmf& j);
json to_json(const Channel& c);

json read_json_file(const std::string& path);

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

/// Parses a decimal string such as "0.1", "-2.5e-3" or "1/3" to a double.
double parse_decimal(const std::string& s);

}  // namespace synth
