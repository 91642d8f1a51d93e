#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "notemesh/errors.hpp"
#include "notemesh/midi_io.hpp"
#include "notemesh/types.hpp"

namespace notemesh {

namespace fs = std::filesystem;

struct DatasetSpec {
  fs::path root;
  std::vector<fs::path> files;  // sorted lexicographically
};

inline bool has_midi_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".mid" || ext == ".midi";
}

/// Every .mid/.midi file under `root` (recursively), or `root` itself when it
/// names a file.
inline DatasetSpec resolve_dataset(const fs::path& root) {
  DatasetSpec spec{root, {}};
  std::error_code ec;
  if (fs::is_regular_file(root, ec)) {
    spec.files.push_back(root);
    return spec;
  }
  if (!fs::is_directory(root, ec)) throw DatasetError(root.string() + " is not a file or directory");
  for (const auto& entry : fs::recursive_directory_iterator(root, ec)) {
    if (entry.is_regular_file() && has_midi_extension(entry.path())) spec.files.push_back(entry.path());
  }
  std::sort(spec.files.begin(), spec.files.end());
  return spec;
}

/// Worker count from NOTEMESH_THREADS; 0 or unset means one per hardware thread.
inline unsigned worker_count() {
  unsigned n = 0;
  if (const char* env = std::getenv("NOTEMESH_THREADS")) n = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

/// Runs fn(i) for i in [0, count) across up to `threads` workers. Callers
/// write results by index, so output order never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

/// Parses every file of the dataset. Unreadable files are collected and
/// reported together in one DatasetError.
inline std::vector<Score> load_dataset(const DatasetSpec& spec, unsigned threads = worker_count()) {
  std::vector<Score> scores(spec.files.size());
  std::vector<std::string> errors(spec.files.size());
  parallel_for(spec.files.size(), threads, [&](std::size_t i) {
    try {
      scores[i] = load_midi_file(spec.files[i].string());
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::string failed;
  for (const auto& e : errors) {
    if (!e.empty()) failed += "\n  " + e;
  }
  if (!failed.empty()) throw DatasetError("unreadable files in " + spec.root.string() + ":" + failed);
  return scores;
}

}  // namespace notemesh
