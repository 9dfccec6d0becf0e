#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "softmod/network.hpp"

namespace softmod {

inline constexpr std::size_t kObservationDim = 7;  // [agent xy, object xy, goal xy, held]
inline constexpr std::size_t kActionDim = 3;       // [dx, dy, grip]
inline constexpr double kStepSize = 0.05;
inline constexpr double kContactRadius = 0.07;
inline constexpr double kSuccessThreshold = 0.05;
inline constexpr int kHorizon = 100;

enum class TaskKind { Reach, ReachHard, Push, PushWall, Carry, CarryWall, Button, Slide };
enum class GoalMode { Fixed, Conditioned };
enum class SuitePreset { MT4, MT8 };

std::string to_string(TaskKind kind);
std::string to_string(GoalMode mode);

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Vec2&) const = default;
};

// Axis-aligned rectangle; a degenerate box is a single point.
struct Box {
    Vec2 lo;
    Vec2 hi;

    bool operator==(const Box&) const = default;
};

struct TaskSpec {
    int task_id = 0;
    TaskKind kind = TaskKind::Reach;
    GoalMode mode = GoalMode::Fixed;
    Vec2 fixed_goal;
    Box goal_region;
    Vec2 object_start;
    double success_threshold = kSuccessThreshold;
    int horizon = kHorizon;

    bool has_wall() const;
};

struct EnvState {
    Vec2 agent;
    Vec2 object;
    Vec2 goal;
    bool held = false;
    int t = 0;

    bool operator==(const EnvState&) const = default;
};

using Observation = std::array<double, kObservationDim>;

struct StepResult {
    EnvState state;
    Observation observation{};
    double reward = 0.0;
    bool success = false;
    bool terminal = false;  // success ends the episode
    bool done = false;      // terminal or horizon reached
};

EnvState reset(const TaskSpec& spec, Rng& rng);
Observation observe(const EnvState& state);
// Pure transition: the result depends only on (state, spec, action).
StepResult step(const EnvState& state, const TaskSpec& spec, std::span<const double> action);
bool success(const EnvState& state, const TaskSpec& spec);
double reward(const EnvState& state, const TaskSpec& spec);

std::vector<TaskSpec> make_suite(SuitePreset preset, GoalMode mode, std::uint64_t seed);
// Parses "mt4-fixed", "mt8-cond", "mt4-conditioned", ...
std::vector<TaskSpec> make_suite(const std::string& name, std::uint64_t seed);

// Greedy scripted controller: approach the object, grasp, carry to the goal,
// release. Reach-like tasks go straight to the goal. Wall tasks route over
// the top of the wall.
std::array<double, kActionDim> scripted_expert(const EnvState& state, const TaskSpec& spec);

// ---- generic episodic environment used by the trainer ---------------------

struct EnvStep {
    std::vector<double> observation;
    double reward = 0.0;
    bool terminal = false;
    bool done = false;
    bool success = false;
};

class Environment {
public:
    virtual ~Environment() = default;
    virtual std::size_t observation_dim() const = 0;
    virtual std::size_t action_dim() const = 0;
    virtual std::vector<double> reset(Rng& rng) = 0;
    virtual EnvStep step(std::span<const double> action) = 0;
};

class SuiteEnv final : public Environment {
public:
    explicit SuiteEnv(TaskSpec spec) : spec_(spec) {}

    std::size_t observation_dim() const override { return kObservationDim; }
    std::size_t action_dim() const override { return kActionDim; }
    std::vector<double> reset(Rng& rng) override;
    EnvStep step(std::span<const double> action) override;

    const TaskSpec& spec() const { return spec_; }
    const EnvState& state() const { return state_; }

private:
    TaskSpec spec_;
    EnvState state_;
};

// One state, one action dimension, reward 1 every step, never terminal.
// The soft value of any policy is 1/(1-gamma) up to the entropy bonus.
class BanditEnv final : public Environment {
public:
    explicit BanditEnv(int horizon = kHorizon) : horizon_(horizon) {}

    std::size_t observation_dim() const override { return 1; }
    std::size_t action_dim() const override { return 1; }
    std::vector<double> reset(Rng& rng) override;
    EnvStep step(std::span<const double> action) override;

private:
    int horizon_;
    int t_ = 0;
};

}  // namespace softmod
