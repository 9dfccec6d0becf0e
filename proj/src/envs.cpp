#include "softmod/envs.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace softmod {

namespace {

constexpr double kWallHalfWidth = 0.05;
constexpr double kWallTop = 0.2;
constexpr double kWallDetourHeight = 0.35;
constexpr double kWallDetourOffset = 0.15;
constexpr double kJitter = 0.05;
constexpr Vec2 kAgentStart{-0.8, -0.8};

double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }
Vec2 clip_arena(Vec2 p) { return {clip(p.x, -1.0, 1.0), clip(p.y, -1.0, 1.0)}; }
double dist(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

bool in_wall(Vec2 p) { return p.x >= -kWallHalfWidth && p.x <= kWallHalfWidth && p.y <= kWallTop; }

// Moves p by delta inside the arena; with a wall, any motion component that
// would end inside the strip is zeroed.
Vec2 move(Vec2 p, Vec2 delta, bool wall) {
    Vec2 next = clip_arena({p.x + delta.x, p.y + delta.y});
    if (!wall || !in_wall(next)) return next;
    if (in_wall(clip_arena({p.x + delta.x, p.y}))) delta.x = 0.0;
    if (in_wall(clip_arena({p.x, p.y + delta.y}))) delta.y = 0.0;
    next = clip_arena({p.x + delta.x, p.y + delta.y});
    return in_wall(next) ? p : next;
}

bool reach_family(TaskKind k) { return k == TaskKind::Reach || k == TaskKind::ReachHard || k == TaskKind::Button; }
bool carry_family(TaskKind k) { return k == TaskKind::Carry || k == TaskKind::CarryWall; }

struct TaskLayout {
    TaskKind kind;
    Vec2 object_start;
    Box goal_region;
};

// Object start and goal region per task kind. Wall tasks put the goal on the
// far side of the wall from the agent's start.
TaskLayout layout_for(TaskKind kind) {
    switch (kind) {
        case TaskKind::Reach: return {kind, {0.6, -0.6}, {{0.0, 0.0}, {0.8, 0.8}}};
        case TaskKind::ReachHard: return {kind, {-0.6, 0.6}, {{0.3, -0.8}, {0.8, -0.2}}};
        case TaskKind::Push: return {kind, {-0.3, -0.3}, {{0.1, -0.2}, {0.7, 0.4}}};
        case TaskKind::PushWall: return {kind, {-0.4, -0.3}, {{0.3, -0.6}, {0.7, -0.1}}};
        case TaskKind::Carry: return {kind, {0.3, -0.5}, {{-0.6, 0.3}, {0.6, 0.8}}};
        case TaskKind::CarryWall: return {kind, {-0.4, -0.5}, {{0.3, -0.7}, {0.7, -0.2}}};
        case TaskKind::Button: return {kind, {0.5, 0.5}, {{-0.6, 0.85}, {0.6, 0.9}}};
        case TaskKind::Slide: return {kind, {-0.6, 0.5}, {{0.2, 0.4}, {0.8, 0.6}}};
    }
    throw ConfigError("unknown task kind");
}

Vec2 sample_box(const Box& box, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    const double v = unit(rng);
    return {box.lo.x + (box.hi.x - box.lo.x) * u, box.lo.y + (box.hi.y - box.lo.y) * v};
}

Vec2 jitter(Vec2 p, Rng& rng) {
    std::uniform_real_distribution<double> j(-kJitter, kJitter);
    const double dx = j(rng);
    const double dy = j(rng);
    return {p.x + dx, p.y + dy};
}

// Next intermediate target when travelling from `from` to `to`; detours over
// the wall top when the straight line would cross the strip.
Vec2 waypoint(Vec2 from, Vec2 to, bool wall) {
    if (!wall || (from.x < 0.0) == (to.x < 0.0)) return to;
    const double side = from.x < 0.0 ? -1.0 : 1.0;
    if (from.y < kWallDetourHeight - 0.05) return {side * kWallDetourOffset, kWallDetourHeight};
    return {-side * kWallDetourOffset, kWallDetourHeight};
}

std::array<double, kActionDim> head_to(Vec2 from, Vec2 target, double grip) {
    double ux = (target.x - from.x) / kStepSize;
    double uy = (target.y - from.y) / kStepSize;
    const double norm = std::hypot(ux, uy);
    if (norm > 1.0) {
        ux /= norm;
        uy /= norm;
    }
    return {ux, uy, grip};
}

}  // namespace

std::string to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::Reach: return "reach";
        case TaskKind::ReachHard: return "reach_hard";
        case TaskKind::Push: return "push";
        case TaskKind::PushWall: return "push_wall";
        case TaskKind::Carry: return "carry";
        case TaskKind::CarryWall: return "carry_wall";
        case TaskKind::Button: return "button";
        case TaskKind::Slide: return "slide";
    }
    return "unknown";
}

std::string to_string(GoalMode mode) { return mode == GoalMode::Fixed ? "fixed" : "conditioned"; }

bool TaskSpec::has_wall() const {
    return kind == TaskKind::ReachHard || kind == TaskKind::PushWall || kind == TaskKind::CarryWall;
}

EnvState reset(const TaskSpec& spec, Rng& rng) {
    EnvState s;
    s.agent = clip_arena(jitter(kAgentStart, rng));
    s.object = clip_arena(jitter(spec.object_start, rng));
    // Both modes draw the goal so that the random stream is identical.
    const Vec2 sampled = sample_box(spec.goal_region, rng);
    s.goal = spec.mode == GoalMode::Fixed ? spec.fixed_goal : sampled;
    s.held = false;
    s.t = 0;
    return s;
}

Observation observe(const EnvState& s) {
    return {s.agent.x, s.agent.y, s.object.x, s.object.y, s.goal.x, s.goal.y, s.held ? 1.0 : 0.0};
}

bool success(const EnvState& s, const TaskSpec& spec) {
    if (reach_family(spec.kind)) return dist(s.agent, s.goal) < spec.success_threshold;
    if (carry_family(spec.kind)) return dist(s.object, s.goal) < spec.success_threshold && !s.held;
    return dist(s.object, s.goal) < spec.success_threshold;
}

double reward(const EnvState& s, const TaskSpec& spec) {
    if (spec.kind == TaskKind::Button) {
        const double d = dist(s.agent, s.goal);
        return -d + (d < spec.success_threshold ? 1.0 : 0.0);
    }
    if (reach_family(spec.kind)) return -dist(s.agent, s.goal);
    double r = -dist(s.agent, s.object) - dist(s.object, s.goal);
    if (carry_family(spec.kind) && s.held) r += 0.25;
    return r;
}

StepResult step(const EnvState& state, const TaskSpec& spec, std::span<const double> action) {
    if (action.size() != kActionDim) {
        throw DimensionError("env step expects " + std::to_string(kActionDim) + " action values, got " +
                             std::to_string(action.size()));
    }
    const double u1 = clip(action[0], -1.0, 1.0);
    const double u2 = clip(action[1], -1.0, 1.0);
    const double u3 = clip(action[2], -1.0, 1.0);
    const bool wall = spec.has_wall();
    const Vec2 delta{kStepSize * u1, kStepSize * u2};

    EnvState s = state;
    s.agent = move(s.agent, delta, wall);
    if (u3 > 0.0) {
        if (dist(s.agent, s.object) < kContactRadius) s.held = true;
    } else {
        s.held = false;
    }
    if (s.held) {
        s.object = s.agent;
    } else if (dist(s.agent, s.object) < kContactRadius) {
        s.object = move(s.object, delta, wall);
    }
    s.t = state.t + 1;

    StepResult out;
    out.reward = reward(s, spec);
    out.success = success(s, spec);
    out.terminal = out.success;
    out.done = out.success || s.t >= spec.horizon;
    out.state = s;
    out.observation = observe(s);
    return out;
}

std::vector<TaskSpec> make_suite(SuitePreset preset, GoalMode mode, std::uint64_t seed) {
    std::vector<TaskKind> kinds{TaskKind::Reach, TaskKind::Push, TaskKind::Carry, TaskKind::Button};
    if (preset == SuitePreset::MT8) {
        kinds.insert(kinds.end(), {TaskKind::ReachHard, TaskKind::PushWall, TaskKind::CarryWall, TaskKind::Slide});
    }
    Rng rng(seed);
    std::vector<TaskSpec> suite;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        const TaskLayout lay = layout_for(kinds[i]);
        TaskSpec spec;
        spec.task_id = static_cast<int>(i);
        spec.kind = kinds[i];
        spec.mode = mode;
        spec.goal_region = lay.goal_region;
        spec.object_start = lay.object_start;
        spec.fixed_goal = sample_box(lay.goal_region, rng);
        suite.push_back(spec);
    }
    return suite;
}

std::vector<TaskSpec> make_suite(const std::string& name, std::uint64_t seed) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    const auto dash = lower.find_first_of("-x_");
    if (dash == std::string::npos) throw ConfigError("unknown suite preset '" + name + "'");
    const std::string size = lower.substr(0, dash);
    const std::string mode = lower.substr(dash + 1);
    SuitePreset preset;
    if (size == "mt4") {
        preset = SuitePreset::MT4;
    } else if (size == "mt8") {
        preset = SuitePreset::MT8;
    } else {
        throw ConfigError("unknown suite preset '" + name + "'");
    }
    GoalMode goal_mode;
    if (mode == "fixed") {
        goal_mode = GoalMode::Fixed;
    } else if (mode == "cond" || mode == "conditioned") {
        goal_mode = GoalMode::Conditioned;
    } else {
        throw ConfigError("unknown suite preset '" + name + "'");
    }
    return make_suite(preset, goal_mode, seed);
}

std::array<double, kActionDim> scripted_expert(const EnvState& s, const TaskSpec& spec) {
    const bool wall = spec.has_wall();
    if (reach_family(spec.kind)) return head_to(s.agent, waypoint(s.agent, s.goal, wall), -1.0);
    if (!s.held) return head_to(s.agent, waypoint(s.agent, s.object, wall), 1.0);
    if (carry_family(spec.kind) && dist(s.object, s.goal) < 0.2 * spec.success_threshold) return {0.0, 0.0, -1.0};
    return head_to(s.agent, waypoint(s.agent, s.goal, wall), 1.0);
}

std::vector<double> SuiteEnv::reset(Rng& rng) {
    state_ = softmod::reset(spec_, rng);
    const Observation o = observe(state_);
    return {o.begin(), o.end()};
}

EnvStep SuiteEnv::step(std::span<const double> action) {
    StepResult r = softmod::step(state_, spec_, action);
    state_ = r.state;
    return {{r.observation.begin(), r.observation.end()}, r.reward, r.terminal, r.done, r.success};
}

std::vector<double> BanditEnv::reset(Rng&) {
    t_ = 0;
    return {1.0};
}

EnvStep BanditEnv::step(std::span<const double> action) {
    if (action.size() != 1) throw DimensionError("bandit env expects one action value");
    ++t_;
    return {{1.0}, 1.0, false, t_ >= horizon_, false};
}

}  // namespace softmod
