#pragma once

// Hand-built demonstration traces whose contact-change times are known by
// construction. Nothing here calls into the segmentation code.

#include <algorithm>
#include <string>
#include <vector>

#include "svip/scenegraph.hpp"
#include "svip/world.hpp"

namespace fixtures {

using namespace svip;

inline Posed lerp_pose(const Posed& a, const Posed& b, double s) {
  s = std::clamp(s, 0.0, 1.0);
  return Posed::planar((1 - s) * a.translation.x() + s * b.translation.x(), (1 - s) * a.translation.y() + s * b.translation.y(),
                       a.yaw() + s * wrap_angle(b.yaw() - a.yaw()), (1 - s) * a.translation.z() + s * b.translation.z());
}

inline double ramp(int t, int t0, int t1) { return t1 <= t0 ? 1.0 : static_cast<double>(t - t0) / (t1 - t0); }

inline ObjectState bar(const std::string& id, const Posed& pose, double hx = 0.04, double hy = 0.015) {
  ObjectState o;
  o.id = id;
  o.kind = "bar";
  o.shape = Footprint::rectangle(hx, hy);
  o.pose = pose;
  return o;
}

struct Handoff {
  DemoTrace trace;
  std::vector<int> keyframes;  // expected keyframe timestamps
  size_t pre = 0, mid = 0, eff = 0;
};

/// Right gripper picks o1 at t1, left joins at t2, right lets go at t3.
/// Timestamps are `stride` apart so that step index and t differ.
inline Handoff handoff(int steps, int t1, int t2, int t3, int stride = 1) {
  Handoff h;
  DemoTrace& tr = h.trace;
  tr.task = "handoff";
  tr.header = make_desk();
  const Posed o_start = Posed::planar(0.15, 0.0, 0.0);
  tr.header.objects.push_back(bar("o1", o_start));
  const Posed r_home = tr.header.arm("h_r").home;
  const Posed l_home = tr.header.arm("h_l").home;
  const Posed r_in_o = Posed::planar(0.03, 0.0, M_PI);  // right grasp in the object frame
  const Posed l_in_o = Posed::planar(-0.03, 0.0, 0.0);
  const Posed o_mid = Posed::planar(0.0, 0.0, 0.0, 0.05);
  const int arrive = std::max(1, t1 - 10);
  for (int s = 0; s < steps; ++s) {
    TraceStep st;
    st.t = s * stride;
    const int k = s;
    Posed obj = o_start;
    if (k >= t1) obj = lerp_pose(o_start, o_mid, ramp(k, t1, (t1 + t2) / 2));
    Posed right = compose(obj, r_in_o);
    if (k < t1) right = lerp_pose(r_home, compose(o_start, r_in_o), ramp(k, 0, arrive));
    if (k >= t3) right = lerp_pose(compose(o_mid, r_in_o), r_home, ramp(k, t3 + 5, steps - 1));
    Posed left = lerp_pose(l_home, compose(o_mid, l_in_o), ramp(k, 0, std::max(1, t2 - 5)));
    st.objects["o1"] = obj;
    st.grippers["h_r"] = {right, k >= t1 && k < t3};
    st.grippers["h_l"] = {left, k >= t2};
    tr.steps.push_back(st);
  }
  h.keyframes = {0, t1 * stride, t2 * stride, t3 * stride};
  h.pre = 1;
  h.mid = 2;
  h.eff = 3;
  return h;
}

struct Insertion {
  DemoTrace trace;
  std::vector<int> keyframes;
  size_t pre = 0, mid = 0;
  bool has_eff = false;
  size_t eff = 0;
};

/// Left grasps "socket" at ta, right grasps "peg" at tb, the two are slid
/// together and touch at tc. With tr >= 0 the peg is pulled apart and
/// released at tr, otherwise the trace ends in contact.
inline Insertion insertion(int steps, int ta, int tb, int tc, int tr = -1) {
  Insertion ins;
  DemoTrace& tr_ = ins.trace;
  tr_.task = "insertion";
  tr_.header = make_desk();
  const Posed s0 = Posed::planar(-0.2, 0.0, 0.0);
  const Posed p0 = Posed::planar(0.2, 0.0, 0.0);
  tr_.header.objects.push_back(bar("socket", s0, 0.06, 0.025));
  tr_.header.objects.push_back(bar("peg", p0, 0.04, 0.01));
  const Posed l_in = Posed::planar(-0.04, 0.0, 0.0);
  const Posed r_in = Posed::planar(0.03, 0.0, M_PI);
  const Posed l_home = tr_.header.arm("h_l").home;
  const Posed r_home = tr_.header.arm("h_r").home;
  // Socket right edge ends at x = -0.04; the peg's left edge is at x - 0.04.
  const Posed s_goal = Posed::planar(-0.10, 0.0, 0.0);
  const Posed p_near = Posed::planar(0.02, 0.0, 0.0);   // gap 0.02 to the socket
  const Posed p_touch = Posed::planar(0.0, 0.0, 0.0);   // edges coincide
  const Posed p_apart = Posed::planar(0.1, 0.0, 0.0);
  const int start = std::max(ta, tb) + 1;
  for (int k = 0; k < steps; ++k) {
    TraceStep st;
    st.t = k;
    Posed sock = k > ta ? lerp_pose(s0, s_goal, ramp(k, ta, start + 5)) : s0;
    Posed peg = p0;
    if (k > tb) peg = lerp_pose(p0, p_near, ramp(k, tb, tc - 1));
    if (k >= tc) peg = p_touch;
    if (tr >= 0 && k >= tr) peg = p_apart;
    if (tr >= 0 && k > tr + 1) peg = p_apart;
    const Posed left = k < ta ? lerp_pose(l_home, compose(s0, l_in), ramp(k, 0, std::max(1, ta - 3))) : compose(sock, l_in);
    Posed right = k < tb ? lerp_pose(r_home, compose(p0, r_in), ramp(k, 0, std::max(1, tb - 3))) : compose(peg, r_in);
    const bool r_closed = k >= tb && (tr < 0 || k < tr);
    st.objects["socket"] = sock;
    st.objects["peg"] = peg;
    st.grippers["h_l"] = {left, k >= ta};
    st.grippers["h_r"] = {right, r_closed};
    tr_.steps.push_back(st);
  }
  ins.keyframes = {0, ta, tb, tc};
  // Index order follows time order of the two grasps.
  ins.pre = 2;
  ins.mid = 3;
  if (tr >= 0) {
    ins.keyframes.push_back(tr);
    ins.has_eff = true;
    ins.eff = 4;
  }
  return ins;
}

}  // namespace fixtures
