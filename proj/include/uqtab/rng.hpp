#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace uqtab {

// 64-bit mixing hash (SplitMix64 finalizer). Pure, platform independent.
std::uint64_t mix64(std::uint64_t x);

// FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);

// Derives a child seed from (master_seed, label, index). Pure; two calls
// with the same arguments always give the same value, distinct labels or
// indices give unrelated values.
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view label,
                          std::uint64_t index);

// Counter-based random stream. The entire state is (seed, counter), so a
// stream can be serialized, copied, and replayed; identical (master_seed,
// label, index) triples yield identical sequences on any platform.
//
// Every source of randomness in this repository flows through RngStream.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string label, std::uint64_t index)
      : master_seed_(master_seed),
        label_(std::move(label)),
        index_(index),
        seed_(derive_seed(master_seed, label_, index)),
        counter_(0) {}

  // Child stream, e.g. one per ensemble member or search trial.
  RngStream child(std::string label, std::uint64_t index) const {
    return RngStream(seed_, std::move(label), index);
  }

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  // Uniform in [lo, hi).
  double uniform(double lo, double hi);

  // Uniform integer in [0, n), n >= 1.
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal via Box-Muller; consumes two uniforms per draw.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::uint64_t master_seed() const { return master_seed_; }
  const std::string& label() const { return label_; }
  std::uint64_t index() const { return index_; }
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

 private:
  std::uint64_t master_seed_;
  std::string label_;
  std::uint64_t index_;
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace uqtab
