#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "accelshape/accelerator.hpp"
#include "accelshape/control.hpp"
#include "accelshape/datapath.hpp"
#include "accelshape/fabric.hpp"
#include "accelshape/shaper.hpp"
#include "accelshape/types.hpp"

namespace accelshape {

using Json = nlohmann::json;

/// Throws ConfigError naming the first key of `j` outside `allowed`.
void expect_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view context);
/// Reads and parses a JSON file, mapping I/O and syntax errors to ConfigError.
Json read_json_file(const std::filesystem::path& path);
/// Writes `text` to `path` via a temporary sibling and rename; removes the
/// temporary on failure.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

void to_json(Json& j, const FlowId& v);
void from_json(const Json& j, FlowId& v);
void to_json(Json& j, const SizeDist& v);
void from_json(const Json& j, SizeDist& v);
void to_json(Json& j, const TrafficPattern& v);
void from_json(const Json& j, TrafficPattern& v);
void to_json(Json& j, const SloTarget& v);
void from_json(const Json& j, SloTarget& v);
void to_json(Json& j, const FlowSpec& v);
void from_json(const Json& j, FlowSpec& v);

void to_json(Json& j, const CapacityCurve& v);
void from_json(const Json& j, CapacityCurve& v);
void to_json(Json& j, const EgressRatio& v);
void from_json(const Json& j, EgressRatio& v);
void to_json(Json& j, const ServiceTimeDist& v);
void from_json(const Json& j, ServiceTimeDist& v);
void to_json(Json& j, const AcceleratorModel& v);
void from_json(const Json& j, AcceleratorModel& v);

void to_json(Json& j, const ChannelConfig& v);
void from_json(const Json& j, ChannelConfig& v);
void to_json(Json& j, const ShaperRegisters& v);
void from_json(const Json& j, ShaperRegisters& v);
void to_json(Json& j, const SoftShaperConfig& v);
void from_json(const Json& j, SoftShaperConfig& v);

void to_json(Json& j, const PathOption& v);
void from_json(const Json& j, PathOption& v);
void to_json(Json& j, const ProfileRole& v);
void from_json(const Json& j, ProfileRole& v);
void to_json(Json& j, const ProfileKey& v);
void from_json(const Json& j, ProfileKey& v);
void to_json(Json& j, const CapacityProfile& v);
void from_json(const Json& j, CapacityProfile& v);
void to_json(Json& j, const ProfileTable& v);
void from_json(const Json& j, ProfileTable& v);
void to_json(Json& j, const ControlConfig& v);
void from_json(const Json& j, ControlConfig& v);
void to_json(Json& j, const StatusRecord& v);
void from_json(const Json& j, StatusRecord& v);
void to_json(Json& j, const ControlEvent& v);
void from_json(const Json& j, ControlEvent& v);

ProfileTable load_profile(const std::filesystem::path& path);
void save_profile(const ProfileTable& table, const std::filesystem::path& path);

}  // namespace accelshape
