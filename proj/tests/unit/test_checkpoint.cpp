#include <gtest/gtest.h>
#include <torch/torch.h>

#include <fstream>

#include "avid/checkpoint.hpp"
#include "avid/errors.hpp"
#include "test_support.hpp"

namespace avid {
namespace {

using test::TempDir;

ArchConfig arch() {
  ArchConfig a;
  a.inpainter.widths = {4, 8};
  a.input_height = 56;
  a.input_width = 84;
  return a;
}

Checkpoint pair_checkpoint() {
  auto m = init_models(arch(), 3);
  Checkpoint c;
  c.kind = CheckpointKind::pair;
  c.arch = arch();
  c.step = 1234;
  c.rng_state = "1 2 3";
  c.inpainter = snapshot(*m.inpainter);
  c.detector = snapshot(*m.detector);
  c.extra.emplace_back("velocity/0", torch::rand({2, 3}));
  return c;
}

void expect_same(const ParameterSnapshot& a, const ParameterSnapshot& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_TRUE(torch::equal(a[i].second, b[i].second)) << a[i].first;
  }
}

TEST(Checkpoint, RoundTripIsExact) {
  TempDir dir;
  const auto c = pair_checkpoint();
  save_checkpoint(dir / "a.ckpt", c);
  const auto r = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(r.kind, c.kind);
  EXPECT_EQ(r.arch, c.arch);
  EXPECT_EQ(r.step, 1234);
  EXPECT_EQ(r.rng_state, "1 2 3");
  expect_same(r.inpainter, c.inpainter);
  expect_same(r.detector, c.detector);
  expect_same(r.extra, c.extra);

  // Saving the loaded archive again reproduces the same bytes.
  save_checkpoint(dir / "b.ckpt", r);
  EXPECT_EQ(test::read_file(dir / "a.ckpt"), test::read_file(dir / "b.ckpt"));
}

TEST(Checkpoint, ApplyRebuildsIdenticalModels) {
  TempDir dir;
  const auto c = pair_checkpoint();
  save_checkpoint(dir / "a.ckpt", c);
  auto m = init_models(arch(), 99);
  apply_checkpoint(load_checkpoint(dir / "a.ckpt"), m);
  auto ref = init_models(arch(), 3);
  const auto x = torch::rand({1, 3, 56, 84});
  EXPECT_TRUE(torch::equal(m.inpainter->forward(x), ref.inpainter->forward(x)));
  EXPECT_TRUE(torch::equal(m.detector->forward(x), ref.detector->forward(x)));
}

TEST(Checkpoint, SingleNetworkKinds) {
  TempDir dir;
  auto c = pair_checkpoint();
  c.kind = CheckpointKind::detector;
  c.inpainter.clear();
  save_checkpoint(dir / "d.ckpt", c);
  const auto r = load_checkpoint(dir / "d.ckpt");
  EXPECT_EQ(r.kind, CheckpointKind::detector);
  EXPECT_TRUE(r.inpainter.empty());
  expect_same(r.detector, c.detector);
}

TEST(Checkpoint, MissingFileNamesThePath) {
  TempDir dir;
  try {
    load_checkpoint(dir / "nope.ckpt");
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("nope.ckpt"), std::string::npos);
  }
}

TEST(Checkpoint, BadMagicVersionAndTruncation) {
  TempDir dir;
  save_checkpoint(dir / "a.ckpt", pair_checkpoint());
  const auto bytes = test::read_file(dir / "a.ckpt");

  auto bad = bytes;
  bad[0] = 'X';
  test::write_file(dir / "magic.ckpt", bad);
  EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), LoadError);

  bad = bytes;
  bad[8] = static_cast<char>(kCheckpointVersion + 1);
  test::write_file(dir / "version.ckpt", bad);
  EXPECT_THROW(load_checkpoint(dir / "version.ckpt"), LoadError);

  for (std::size_t cut : {std::size_t{4}, std::size_t{15}, std::size_t{40}, bytes.size() - 1}) {
    test::write_file(dir / "short.ckpt", bytes.substr(0, cut));
    EXPECT_THROW(load_checkpoint(dir / "short.ckpt"), LoadError) << "cut at " << cut;
  }
}

TEST(Checkpoint, ArchJsonRoundTrip) {
  auto a = arch();
  a.inpainter.input_bias = true;
  a.detector.leaky_slope = 0.1;
  EXPECT_EQ(arch_from_json(arch_to_json(a)), a);
}

}  // namespace
}  // namespace avid
