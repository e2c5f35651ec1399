#include "mlio/graph/sliding_window.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace mlio::graph {

bool select_keyframe(const SE3& last_keyframe, const SE3& candidate,
                     const KeyframeThresholds& thresholds) {
  return translation_distance(last_keyframe, candidate) > thresholds.distance ||
         rotation_distance(last_keyframe, candidate) >
             thresholds.rotation_deg * M_PI / 180.0;
}

SlidingWindow::SlidingWindow(WindowConfig config) : config_(std::move(config)) {
  if (config_.capacity < 2) throw std::invalid_argument("window capacity below 2");
}

SolverReport SlidingWindow::insert(Keyframe keyframe, InsertPayload payload) {
  if (!keyframes_.empty()) {
    const Keyframe& prev = keyframes_.back();
    if (keyframe.index <= prev.index || !(prev.t < keyframe.t)) {
      throw std::invalid_argument("keyframe indices and timestamps must increase");
    }
    if (!payload.preint) {
      throw std::invalid_argument("non-first keyframe needs a preintegration span");
    }
  }
  keyframe.has_ground = keyframe.ground_plane.has_value();
  keyframe.has_rtk = payload.rtk.has_value();
  keyframes_.push_back(std::move(keyframe));
  const int slot = static_cast<int>(keyframes_.size()) - 1;

  if (slot == 0) {
    // Weak anchor: honest priors on the initial state, strong enough to
    // remove the gauge until absolute fixes arrive.
    Vec16 sigmas;
    sigmas.segment<3>(0).setConstant(config_.anchor_rotation_sigma);
    sigmas.segment<3>(3).setConstant(config_.anchor_position_sigma);
    sigmas.segment<3>(6).setConstant(config_.anchor_velocity_sigma);
    sigmas.segment<3>(9).setConstant(config_.anchor_accel_bias_sigma);
    sigmas.segment<3>(12).setConstant(config_.anchor_gyro_bias_sigma);
    sigmas(15) = config_.anchor_scale_sigma;
    prior_ = LinearFactor({0}, {keyframes_[0].state},
                          sigmas.cwiseInverse().asDiagonal().toDenseMatrix(),
                          Eigen::VectorXd::Zero(kStateDim));
  } else {
    factors_.push_back(std::make_unique<PreintFactor>(
        slot - 1, slot, std::move(*payload.preint), config_.gravity));
    const auto& prev_plane = keyframes_[static_cast<std::size_t>(slot) - 1].ground_plane;
    const auto& this_plane = keyframes_[static_cast<std::size_t>(slot)].ground_plane;
    if (prev_plane && this_plane) {
      factors_.push_back(std::make_unique<GroundFactor>(
          slot - 1, slot, *prev_plane, *this_plane, config_.ground_lidar_to_body,
          config_.ground_normal_sigma, config_.ground_offset_sigma));
    }
  }
  if (payload.correspondences.total() > 0) {
    factors_.push_back(std::make_unique<LidarFactor>(slot, std::move(payload.correspondences),
                                                     config_.lidar_sigma,
                                                     config_.huber_delta));
  }
  if (payload.rtk) {
    factors_.push_back(std::make_unique<RtkFactor>(slot, payload.rtk->fix,
                                                   config_.antenna_lever_arm,
                                                   payload.rtk->dt, payload.rtk->sigma));
  }

  if (static_cast<int>(keyframes_.size()) > config_.capacity) marginalize_oldest();

  if (keyframes_.size() < 2) {
    SolverReport rep;
    rep.converged = true;
    return rep;
  }
  return optimize();
}

void SlidingWindow::marginalize_oldest() {
  const auto touches_front = [](const Factor& f) {
    return std::find(f.slots().begin(), f.slots().end(), 0) != f.slots().end();
  };

  std::vector<std::unique_ptr<Factor>> dying;
  std::vector<std::unique_ptr<Factor>> kept;
  for (auto& f : factors_) {
    (touches_front(*f) ? dying : kept).push_back(std::move(f));
  }

  std::vector<const Factor*> touching;
  for (const auto& f : dying) touching.push_back(f.get());
  if (prior_ && touches_front(*prior_)) touching.push_back(&*prior_);

  if (!touching.empty()) {
    std::vector<RobotState> states;
    states.reserve(keyframes_.size());
    for (const Keyframe& kf : keyframes_) states.push_back(kf.state);
    bool flag = false;
    prior_ = marginalize(states, touching, 0, &flag);
    marginalization_flagged_ = flag;
  }

  keyframes_.erase(keyframes_.begin());
  for (auto& f : kept) f->shift_slots(-1);
  if (prior_) prior_->shift_slots(-1);
  factors_ = std::move(kept);
}

SolverReport SlidingWindow::optimize() {
  std::vector<RobotState> states;
  states.reserve(keyframes_.size());
  for (const Keyframe& kf : keyframes_) states.push_back(kf.state);

  std::vector<Factor*> ptrs;
  ptrs.reserve(factors_.size() + 1);
  if (prior_) ptrs.push_back(&*prior_);
  for (const auto& f : factors_) ptrs.push_back(f.get());

  SolverReport rep = solve(&states, ptrs, config_.solver);
  for (std::size_t i = 0; i < keyframes_.size(); ++i) keyframes_[i].state = states[i];
  reports_.push_back(rep);
  return rep;
}

}  // namespace mlio::graph
