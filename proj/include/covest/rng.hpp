#pragma once

// Seeded random substreams.
//
// A master seed and a (replication, component, purpose) triple are fed to
// std::seed_seq, which hashes them into the state of a dedicated
// std::mt19937_64. Each replication owns its streams, so results do not
// depend on how replications are distributed over threads.

#include <cstdint>
#include <random>

#include "covest/matcore.hpp"

namespace covest {

enum class Purpose : std::uint32_t {
  Signal = 1,
  Noise = 2,
  Path = 3,
  Block = 4,
  Aux = 5,
};

struct StreamId {
  std::uint64_t master = 0;
  std::uint64_t replication = 0;
  std::uint32_t component = 0;
  Purpose purpose = Purpose::Signal;
};

class RngStream {
 public:
  explicit RngStream(const StreamId& id) : id_(id) {
    std::seed_seq seq{static_cast<std::uint32_t>(id.master), static_cast<std::uint32_t>(id.master >> 32),
                      static_cast<std::uint32_t>(id.replication),
                      static_cast<std::uint32_t>(id.replication >> 32), id.component,
                      static_cast<std::uint32_t>(id.purpose)};
    engine_.seed(seq);
  }

  RngStream(std::uint64_t master, std::uint64_t replication, std::uint32_t component = 0,
            Purpose purpose = Purpose::Signal)
      : RngStream(StreamId{master, replication, component, purpose}) {}

  double normal() { return normal_(engine_); }

  Vector normals(Eigen::Index k) {
    Vector v(k);
    for (Eigen::Index i = 0; i < k; ++i) v(i) = normal_(engine_);
    return v;
  }

  /// Fills a matrix column by column.
  void fill_normal(Matrix& m) {
    double* p = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = normal_(engine_);
  }

  const StreamId& id() const { return id_; }

  std::mt19937_64& engine() { return engine_; }

 private:
  StreamId id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace covest
