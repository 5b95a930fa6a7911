#include <gtest/gtest.h>

#include "castle/automation.hpp"

using namespace castle;

namespace {

std::size_t clicks(const ScheduledCommand& s) {
  std::size_t c = 0;
  for (const auto& e : s.events) c += !std::holds_alternative<KeyPress>(e.action);
  return c;
}

}  // namespace

TEST(Schedule, SingleSelectionTakesTwoClicks) {
  const auto map = generate_map(16, 16, 16, 4);
  InputScheduler sched(map, {150, 0, 0}, ChannelMode::Combinatorial, 1);
  const auto s = sched.schedule(GameCommand{Opcode::Move, {3}, {1, 2}}, SimTime{0});
  ASSERT_EQ(s.events.size(), 2u);
  EXPECT_EQ(clicks(s), 2u);
  EXPECT_DOUBLE_EQ(to_ms(s.completed), 300.0);
  EXPECT_EQ(std::get<ClickObject>(s.events[0].action).id, 3u);
  const auto cell = std::get<ClickCell>(s.events[1].action);
  EXPECT_EQ(cell.x, map.region.origin_x + 1);
  EXPECT_EQ(cell.y, map.region.origin_y + 2);
}

TEST(Schedule, MultiSelectHoldsModifier) {
  const auto map = generate_map(16, 16, 16, 4);
  InputScheduler sched(map, {10, 0, 0}, ChannelMode::Combinatorial, 1);
  const auto s = sched.schedule(GameCommand{Opcode::Move, {5, 2, 0}, {0, 0}}, SimTime{1000});
  EXPECT_EQ(clicks(s), 4u);
  EXPECT_EQ(std::get<KeyPress>(s.events.front().action), (KeyPress{Modifier::MultiSelect, true}));
  EXPECT_EQ(s.completed, SimTime{1000} + from_ms(40));
}

TEST(Schedule, ByteClickIsOneClick) {
  const auto map = generate_map(256, 32, 32, 4);
  InputScheduler sched(map, {0.33, 2.5, 0}, ChannelMode::ByteClick, 1);
  const auto s = sched.schedule(GameCommand{Opcode::Move, {200}, {0, 0}}, SimTime{0});
  EXPECT_EQ(clicks(s), 1u);
  const double cycle = to_ms(sched.next_start(s.completed));
  EXPECT_NEAR(cycle, 2.83, 0.01);
}

TEST(Schedule, ZeroProfileSharesTimestamp) {
  const auto map = generate_map(16, 16, 16, 4);
  InputScheduler sched(map, {}, ChannelMode::Combinatorial, 1);
  const auto s = sched.schedule(GameCommand{Opcode::Move, {1, 0}, {0, 0}}, SimTime{42});
  for (const auto& e : s.events) EXPECT_EQ(e.at, SimTime{42});
  EXPECT_EQ(s.completed, SimTime{42});
}

TEST(Schedule, UnknownIdRejected) {
  const auto map = generate_map(4, 4, 4, 2);
  InputScheduler sched(map, {1, 0, 0}, ChannelMode::Combinatorial, 1);
  EXPECT_THROW(sched.schedule(GameCommand{Opcode::Move, {9}, {0, 0}}, SimTime{0}), InvalidCommand);
}

TEST(Schedule, JitterNeverReorders) {
  const auto map = generate_map(64, 16, 16, 4);
  InputScheduler sched(map, {2, 0, 5}, ChannelMode::Combinatorial, 9);
  SimTime t{0};
  for (int i = 0; i < 500; ++i) {
    const auto s = sched.schedule(GameCommand{Opcode::Move, {40, 30, 20, 10, 1}, {3, 3}}, t);
    for (std::size_t j = 1; j < s.events.size(); ++j) ASSERT_LE(s.events[j - 1].at, s.events[j].at);
    ASSERT_GE(s.completed, s.events.back().at);
    t = sched.next_start(s.completed);
  }
}

TEST(Schedule, NegativeProfileRejected) {
  const auto map = generate_map(4, 4, 4, 2);
  EXPECT_THROW(InputScheduler(map, {-1, 0, 0}, ChannelMode::Combinatorial, 1), ArgumentError);
}

TEST(ExpectedRate, ZeroAdProfile) {
  ChannelConfig cfg{1600, 200, 256, 256};
  const auto e = expected_rate(cfg, profile_for_command_ms(cfg, 325));
  EXPECT_NEAR(e.command_ms, 325.0, 1e-9);
  EXPECT_NEAR(e.commands_per_second, 3.077, 1e-3);
  EXPECT_NEAR(e.bytes_per_second, 190.0, 0.15 * 190.0);
}

TEST(ExpectedRate, ByteClick) {
  ChannelConfig cfg{256, 1, 2, 1, ChannelMode::ByteClick, 8};
  EXPECT_NEAR(expected_rate(cfg, {0, 2.5, 0}).bytes_per_second, 400.0, 1e-9);
  EXPECT_GE(expected_rate(cfg, {kFastestClickMs, 0, 0}).bytes_per_second, 3000.0);
}

TEST(ExpectedRate, DegenerateProfileCapped) {
  ChannelConfig cfg{256, 1, 2, 1, ChannelMode::ByteClick, 8};
  EXPECT_EQ(expected_rate(cfg, {}).commands_per_second, kMaxCommandRate);
}
