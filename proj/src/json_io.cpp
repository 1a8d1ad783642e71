#include "svip/json_io.hpp"

#include <fstream>
#include <stdexcept>

namespace svip {

Json pose_to_json(const Posed& p) {
  const auto a = p.to_array();
  return Json(std::vector<double>(a.begin(), a.end()));
}

Posed pose_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 7) throw std::runtime_error("pose must be an array of 7 numbers");
  std::array<double, 7> a{};
  for (size_t i = 0; i < 7; ++i) a[i] = j[i].get<double>();
  return Posed::from_array(a);
}

Json cloud_to_json(const PointCloudd& c) { return Json{{"frame", c.frame}, {"points", c.flatten()}}; }

PointCloudd cloud_from_json(const Json& j) {
  return PointCloudd::from_flat(j.at("points").get<std::vector<double>>(), j.value("frame", std::string("world")));
}

Json footprint_to_json(const Footprint& f) {
  Json verts = Json::array();
  for (const auto& v : f.vertices) verts.push_back({v.x(), v.y()});
  return Json{{"vertices", verts}, {"radius", f.radius}};
}

Footprint footprint_from_json(const Json& j) {
  Footprint f;
  f.radius = j.at("radius").get<double>();
  for (const auto& v : j.at("vertices")) f.vertices.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
  if (f.vertices.empty()) throw std::runtime_error("footprint needs at least one vertex");
  return f;
}

namespace {
Json rect_to_json(const Rect& r) { return Json{{"center", {r.center.x(), r.center.y()}}, {"half", {r.half.x(), r.half.y()}}}; }
Rect rect_from_json(const Json& j) {
  return Rect{Vec2d(j.at("center").at(0).get<double>(), j.at("center").at(1).get<double>()),
              Vec2d(j.at("half").at(0).get<double>(), j.at("half").at(1).get<double>())};
}
}  // namespace

Json world_to_json(const WorldState& w) {
  Json j;
  j["table"] = rect_to_json(w.table);
  j["objects"] = Json::array();
  for (const auto& o : w.objects)
    j["objects"].push_back({{"id", o.id},
                            {"kind", o.kind},
                            {"shape", footprint_to_json(o.shape)},
                            {"pose", pose_to_json(o.pose)},
                            {"height", o.height},
                            {"taper", o.taper},
                            {"graspable", o.graspable}});
  j["arms"] = Json::array();
  for (const auto& a : w.arms) {
    Json ja{{"id", a.id},
            {"base", {a.base.x(), a.base.y()}},
            {"reach", a.reach},
            {"gripper", pose_to_json(a.gripper)},
            {"home", pose_to_json(a.home)},
            {"closed", a.closed}};
    if (a.held) {
      ja["held"] = *a.held;
      ja["held_offset"] = pose_to_json(a.held_offset);
    }
    j["arms"].push_back(ja);
  }
  j["regions"] = Json::array();
  for (const auto& r : w.regions) j["regions"].push_back({{"id", r.id}, {"rect", rect_to_json(r.rect)}});
  return j;
}

WorldState world_from_json(const Json& j) {
  WorldState w;
  w.table = rect_from_json(j.at("table"));
  for (const auto& jo : j.at("objects")) {
    ObjectState o;
    o.id = jo.at("id").get<std::string>();
    o.kind = jo.value("kind", o.id);
    o.shape = footprint_from_json(jo.at("shape"));
    o.pose = pose_from_json(jo.at("pose"));
    o.height = jo.value("height", 0.03);
    o.taper = jo.value("taper", 0.0);
    o.graspable = jo.value("graspable", true);
    w.objects.push_back(o);
  }
  for (const auto& ja : j.at("arms")) {
    ArmState a;
    a.id = ja.at("id").get<std::string>();
    a.base = Vec2d(ja.at("base").at(0).get<double>(), ja.at("base").at(1).get<double>());
    a.reach = ja.at("reach").get<double>();
    a.gripper = pose_from_json(ja.at("gripper"));
    a.home = ja.contains("home") ? pose_from_json(ja.at("home")) : a.gripper;
    a.closed = ja.value("closed", false);
    if (ja.contains("held")) {
      a.held = ja.at("held").get<std::string>();
      a.held_offset = pose_from_json(ja.at("held_offset"));
    }
    w.arms.push_back(a);
  }
  if (j.contains("regions"))
    for (const auto& jr : j.at("regions")) w.regions.push_back(Region{jr.at("id").get<std::string>(), rect_from_json(jr.at("rect"))});
  return w;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return Json::parse(in);
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace svip
