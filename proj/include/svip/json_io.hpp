#pragma once

#include <string>

#include <json.hpp>

#include "svip/geometry.hpp"
#include "svip/world.hpp"

namespace svip {

using Json = nlohmann::json;

Json pose_to_json(const Posed& p);
Posed pose_from_json(const Json& j);
Json cloud_to_json(const PointCloudd& c);
PointCloudd cloud_from_json(const Json& j);
Json footprint_to_json(const Footprint& f);
Footprint footprint_from_json(const Json& j);
Json world_to_json(const WorldState& w);
WorldState world_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace svip
