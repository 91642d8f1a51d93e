#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>

#include "test_support.hpp"

using namespace notemesh;
using namespace testsupport;

TEST(Dataset, ResolvesSortedRecursively) {
  const fs::path dir = scratch_dir("dataset_resolve");
  write_dataset(dir / "z", 2, 1);
  write_dataset(dir / "a", 2, 2);
  std::ofstream(dir / "notes.txt") << "x";
  fs::copy_file(dir / "a" / "sample_00.mid", dir / "UPPER.MIDI");
  const auto spec = resolve_dataset(dir);
  ASSERT_EQ(spec.files.size(), 5u);
  EXPECT_TRUE(std::is_sorted(spec.files.begin(), spec.files.end()));
  EXPECT_EQ(spec.files.front().filename(), "UPPER.MIDI");
}

TEST(Dataset, SingleFile) {
  const fs::path f = fixtures_dir() / "valid/a/01_format0_single_channel.mid";
  const auto spec = resolve_dataset(f);
  ASSERT_EQ(spec.files.size(), 1u);
  EXPECT_EQ(spec.files[0], f);
}

TEST(Dataset, MissingPath) { EXPECT_THROW(resolve_dataset("/nonexistent/notemesh"), DatasetError); }

TEST(Dataset, LoadIsOrderStableAcrossThreadCounts) {
  const auto spec = resolve_dataset(fixtures_dir() / "valid");
  const auto one = load_dataset(spec, 1);
  const auto many = load_dataset(spec, 8);
  ASSERT_EQ(one.size(), 15u);
  EXPECT_EQ(one, many);
}

TEST(Dataset, ParallelForVisitsEachIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 6, [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  parallel_for(0, 4, [](std::size_t) { FAIL(); });
}

TEST(Dataset, WorkerCountFromEnvironment) {
  setenv("NOTEMESH_THREADS", "3", 1);
  EXPECT_EQ(worker_count(), 3u);
  setenv("NOTEMESH_THREADS", "0", 1);
  EXPECT_GE(worker_count(), 1u);
  unsetenv("NOTEMESH_THREADS");
}
