#include "svip/scenegraph.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "svip/json_io.hpp"

namespace svip {

namespace wc = world_constants;

void SceneGraph::add_edge(Edge e) { edges.push_back(std::move(e)); }

void SceneGraph::sort_edges() {
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return a.key() < b.key(); });
}

bool SceneGraph::same_mode(const SceneGraph& other) const {
  if (edges.size() != other.edges.size()) return false;
  for (size_t i = 0; i < edges.size(); ++i)
    if (edges[i].key() != other.edges[i].key()) return false;
  return true;
}

std::vector<const Edge*> SceneGraph::edges_with(const std::string& label) const {
  std::vector<const Edge*> out;
  for (const auto& e : edges)
    if (e.label == label) out.push_back(&e);
  return out;
}

int SceneGraph::grasp_count(const std::string& object) const {
  int n = 0;
  for (const auto& e : edges)
    if (e.label == labels::AtGrasp && e.dst == object) ++n;
  return n;
}

bool SceneGraph::contact_rich() const {
  for (const auto& e : edges) {
    if (e.label == labels::Contact) return true;
    if (e.label == labels::AtGrasp && grasp_count(e.dst) >= 2) return true;
  }
  return false;
}

std::string SceneGraph::to_string() const {
  std::ostringstream os;
  for (const auto& e : edges) os << e.label << "(" << e.src << "," << e.dst << ") ";
  return os.str();
}

SceneGraph graph_of_state(const WorldState& s) {
  SceneGraph g;
  g.entities.push_back({kTableId, EntityKind::Region});
  for (const auto& r : s.regions) g.entities.push_back({r.id, EntityKind::Region});
  for (const auto& a : s.arms) g.entities.push_back({a.id, EntityKind::Gripper});
  for (const auto& o : s.objects) g.entities.push_back({o.id, EntityKind::Object});

  for (const auto& a : s.arms) g.add_edge({kTableId, a.id, labels::AtConf, a.gripper});

  for (const auto& o : s.objects) {
    const Footprint fp = o.footprint();
    bool grasped = false;
    for (const auto& a : s.arms) {
      if (!a.closed) continue;
      if (point_footprint_distance(a.gripper.xy(), fp) <= wc::kGraspThreshold) {
        g.add_edge({a.id, o.id, labels::AtGrasp, compose(o.pose.inverse(), a.gripper)});
        grasped = true;
      }
    }
    if (grasped) continue;
    if (o.pose.translation.z() > wc::kOnTableTolerance)
      throw SceneGraphError("object '" + o.id + "' is neither supported nor grasped");
    const Region* support = nullptr;
    for (const auto& r : s.regions)
      if (footprint_contains(r.rect.footprint(), fp, 1e-9)) {
        support = &r;
        break;
      }
    if (support) {
      const Posed frame = Posed::planar(support->rect.center.x(), support->rect.center.y(), 0.0);
      g.add_edge({support->id, o.id, labels::AtRelativePose, compose(frame.inverse(), o.pose)});
    } else {
      g.add_edge({kTableId, o.id, labels::AtPose, o.pose});
    }
  }

  for (size_t i = 0; i < s.objects.size(); ++i)
    for (size_t j = i + 1; j < s.objects.size(); ++j) {
      const auto& a = s.objects[i];
      const auto& b = s.objects[j];
      if (footprint_distance(a.footprint(), b.footprint()) <= wc::kContactClearance) {
        const bool ab = a.id < b.id;
        g.add_edge({ab ? a.id : b.id, ab ? b.id : a.id, labels::Contact, Posed()});
      }
    }
  g.sort_edges();
  return g;
}

// ---------------------------------------------------------------------------

WorldState DemoTrace::state_at(size_t i) const {
  WorldState w = header;
  const TraceStep& st = steps.at(i);
  for (auto& o : w.objects) {
    auto it = st.objects.find(o.id);
    if (it == st.objects.end()) throw SceneGraphError("trace step " + std::to_string(st.t) + " lacks object '" + o.id + "'");
    o.pose = it->second;
  }
  for (auto& a : w.arms) {
    auto it = st.grippers.find(a.id);
    if (it == st.grippers.end()) throw SceneGraphError("trace step " + std::to_string(st.t) + " lacks gripper '" + a.id + "'");
    a.gripper = it->second.pose;
    a.closed = it->second.closed;
    a.held.reset();
    if (!a.closed) continue;
    // Objects nest after insertion, so the pick is decided where the gripper
    // closed and kept while it stays within the threshold.
    size_t onset = i;
    while (onset > 0) {
      auto prev = steps[onset - 1].grippers.find(a.id);
      if (prev == steps[onset - 1].grippers.end() || !prev->second.closed) break;
      --onset;
    }
    const Posed g0 = steps[onset].grippers.at(a.id).pose;
    const ObjectState* best = nullptr;
    std::pair<double, double> best_key{wc::kGraspThreshold, 0.0};
    for (const auto& o : w.objects) {
      const Posed p0 = steps[onset].objects.at(o.id);
      const std::pair<double, double> key{point_footprint_distance(g0.xy(), o.shape.placed(p0)), (g0.xy() - p0.xy()).norm()};
      if (key.first <= wc::kGraspThreshold && (!best || key < best_key)) {
        best = &o;
        best_key = key;
      }
    }
    if (best && point_footprint_distance(a.gripper.xy(), best->footprint()) <= wc::kGraspThreshold) {
      a.held = best->id;
      a.held_offset = compose(a.gripper.inverse(), best->pose);
    }
  }
  return w;
}

void DemoTrace::validate() const {
  for (size_t i = 1; i < steps.size(); ++i)
    if (steps[i].t <= steps[i - 1].t) throw SceneGraphError("trace timestamps must be strictly increasing");
  for (const auto& st : steps) {
    for (const auto& [id, _] : st.objects)
      if (!header.find_object(id)) throw SceneGraphError("trace references undeclared object '" + id + "'");
    for (const auto& [id, _] : st.grippers) {
      bool found = false;
      for (const auto& a : header.arms) found |= a.id == id;
      if (!found) throw SceneGraphError("trace references undeclared gripper '" + id + "'");
    }
  }
}

std::vector<int> EventSequence::times() const {
  std::vector<int> out;
  for (const auto& k : keyframes) out.push_back(k.t);
  return out;
}

std::pair<size_t, size_t> EventSequence::step_range(size_t k, size_t trace_length) const {
  const size_t begin = keyframes.at(k).step;
  const size_t end = k + 1 < keyframes.size() ? keyframes[k + 1].step : trace_length;
  return {begin, end};
}

EventSequence segment(const DemoTrace& trace) {
  if (trace.size() < 2) throw SceneGraphError("segment: trace needs at least 2 timesteps");
  trace.validate();
  EventSequence seq;
  for (size_t i = 0; i < trace.size(); ++i) {
    SceneGraph g = graph_of_state(trace.state_at(i));
    // Simultaneous edge changes within one step collapse into one keyframe.
    if (seq.keyframes.empty() || !seq.keyframes.back().graph.same_mode(g))
      seq.keyframes.push_back({trace.steps[i].t, i, std::move(g)});
  }
  size_t k = 0;
  while (k < seq.keyframes.size()) {
    if (!seq.keyframes[k].graph.contact_rich()) {
      ++k;
      continue;
    }
    size_t m = k;
    while (m + 1 < seq.keyframes.size() && seq.keyframes[m + 1].graph.contact_rich()) ++m;
    // A span that starts at t = 0 has no preceding graph and is not a skill.
    if (k > 0) {
      ContactRichSpan span{k - 1, k, std::nullopt};
      if (m + 1 < seq.keyframes.size()) span.eff = m + 1;
      seq.contact_rich.push_back(span);
    }
    k = m + 1;
  }
  return seq;
}

ObjectCentricTrajectory extract_grasp(const DemoTrace& trace, const std::string& o, size_t event,
                                      const EventSequence& seq, int half_window) {
  if (event == 0 || event >= seq.keyframes.size()) throw SceneGraphError("extract_grasp: event index out of range");
  const auto grasped_by = [&](const SceneGraph& g) {
    std::set<std::string> hs;
    for (const auto& e : g.edges)
      if (e.label == labels::AtGrasp && e.dst == o) hs.insert(e.src);
    return hs;
  };
  const auto before = grasped_by(seq.keyframes[event - 1].graph);
  const auto after = grasped_by(seq.keyframes[event].graph);
  std::string gripper;
  for (const auto& h : after)
    if (!before.count(h)) gripper = h;
  if (gripper.empty())
    for (const auto& h : before)
      if (!after.count(h)) gripper = h;
  if (gripper.empty()) throw SceneGraphError("extract_grasp: keyframe is not a grasp or release of '" + o + "'");

  const long centre = static_cast<long>(seq.keyframes[event].step);
  const long lo = std::max(0L, centre - half_window);
  const long hi = std::min(static_cast<long>(trace.size()) - 1, centre + half_window);

  ObjectCentricTrajectory out;
  out.object = o;
  out.gripper = gripper;
  const ObjectState& obj = trace.header.object(o);
  double best = std::numeric_limits<double>::infinity();
  double closest_fp = std::numeric_limits<double>::infinity();
  for (long i = lo; i <= hi; ++i) {
    const auto& st = trace.steps[static_cast<size_t>(i)];
    const Posed& op = st.objects.at(o);
    const Posed& hp = st.grippers.at(gripper).pose;
    const Posed rel = compose(op.inverse(), hp);
    out.times.push_back(st.t);
    out.poses.push_back(rel);
    const double d = rel.translation.head<2>().norm();
    if (d < best) {
      best = d;
      out.grasp = rel;
    }
    closest_fp = std::min(closest_fp, point_footprint_distance(hp.xy(), obj.shape.placed(op)));
  }
  if (closest_fp > wc::kGraspThreshold) throw SceneGraphError("extract_grasp: no gripper approaches '" + o + "' in the window");
  return out;
}

std::vector<Posed> resample_trajectory(const std::vector<Posed>& poses, size_t waypoints) {
  if (poses.empty() || waypoints == 0) throw SceneGraphError("resample_trajectory: empty input");
  std::vector<Posed> out;
  out.reserve(waypoints);
  for (size_t k = 0; k < waypoints; ++k) {
    const double s = waypoints == 1 ? 0.0 : static_cast<double>(k) * static_cast<double>(poses.size() - 1) / static_cast<double>(waypoints - 1);
    const size_t i = std::min(static_cast<size_t>(s), poses.size() - 1);
    const size_t j = std::min(i + 1, poses.size() - 1);
    const double a = s - static_cast<double>(i);
    out.emplace_back((1.0 - a) * poses[i].translation + a * poses[j].translation, poses[i].rotation.slerp(a, poses[j].rotation));
  }
  return out;
}

// ---------------------------------------------------------------------------

void write_trace(std::ostream& os, const DemoTrace& trace) {
  Json header{{"header", {{"task", trace.task}, {"world", world_to_json(trace.header)}}}};
  os << header.dump() << '\n';
  for (const auto& st : trace.steps) {
    Json j;
    j["t"] = st.t;
    j["grippers"] = Json::object();
    for (const auto& [id, g] : st.grippers) j["grippers"][id] = {{"pose", pose_to_json(g.pose)}, {"closed", g.closed}};
    j["objects"] = Json::object();
    for (const auto& [id, p] : st.objects) j["objects"][id] = pose_to_json(p);
    j["clouds"] = Json::object();
    for (const auto& [id, c] : st.clouds) j["clouds"][id] = cloud_to_json(c);
    os << j.dump() << '\n';
  }
}

DemoTrace read_trace(std::istream& is) {
  DemoTrace trace;
  std::string line;
  bool have_header = false;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const std::exception& e) {
      throw SceneGraphError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!have_header) {
      if (!j.contains("header")) throw SceneGraphError("trace must start with a header line");
      trace.task = j["header"].value("task", std::string());
      trace.header = world_from_json(j["header"].at("world"));
      have_header = true;
      continue;
    }
    TraceStep st;
    st.t = j.at("t").get<int>();
    for (const auto& [id, g] : j.at("grippers").items()) st.grippers[id] = {pose_from_json(g.at("pose")), g.at("closed").get<bool>()};
    for (const auto& [id, p] : j.at("objects").items()) st.objects[id] = pose_from_json(p);
    if (j.contains("clouds"))
      for (const auto& [id, c] : j.at("clouds").items()) st.clouds[id] = cloud_from_json(c);
    trace.steps.push_back(std::move(st));
  }
  if (!have_header) throw SceneGraphError("empty trace");
  trace.validate();
  return trace;
}

void save_trace(const std::string& path, const DemoTrace& trace) {
  std::ofstream out(path);
  if (!out) throw SceneGraphError("cannot write '" + path + "'");
  write_trace(out, trace);
}

DemoTrace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SceneGraphError("cannot open '" + path + "'");
  return read_trace(in);
}

}  // namespace svip
