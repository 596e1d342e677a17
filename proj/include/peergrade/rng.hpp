#pragma once

#include <cstdint>
#include <random>

namespace peergrade {

// splitmix64 finalizer, used to derive stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Reserved entity ids for non-student draws.
constexpr std::uint64_t kQualityEntity = 0xfffffffffffffff0ULL;
constexpr std::uint64_t kTreeEntity = 0xfffffffffffffff1ULL;
constexpr std::uint64_t kInstructorEntity = 0xfffffffffffffff2ULL;
constexpr std::uint64_t kAssignmentEntity = 0xfffffffffffffff3ULL;

// Deterministic RNG stream keyed by (master seed, entity id, replicate).
// Draws from one stream never depend on what other streams have produced,
// so results are independent of evaluation order and parallel schedule.
class RngStream {
 public:
  RngStream(std::uint64_t master, std::uint64_t entity, std::uint64_t replicate)
      : gen_(derive(master, entity, replicate)) {}

  double normal(double mean, double stddev) {
    std::normal_distribution<double> d(mean, stddev);
    return d(gen_);
  }
  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(gen_);
  }
  std::size_t uniform_index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> d(0, n - 1);
    return d(gen_);
  }
  bool bernoulli(double p) {
    std::bernoulli_distribution d(p);
    return d(gen_);
  }
  std::mt19937_64& engine() { return gen_; }

  static std::uint64_t derive(std::uint64_t master, std::uint64_t entity,
                              std::uint64_t replicate) {
    std::uint64_t s = mix64(master);
    s = mix64(s ^ mix64(entity));
    s = mix64(s ^ mix64(replicate));
    return s;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace peergrade
