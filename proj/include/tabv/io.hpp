#pragma once

#include "tabv/dynamics.hpp"
#include "tabv/flatness.hpp"
#include "tabv/indi.hpp"
#include "tabv/kino_search.hpp"
#include "tabv/nmpc.hpp"
#include "tabv/sim.hpp"
#include "tabv/traj_optimizer.hpp"
#include "tabv/trajectories.hpp"
#include "tabv/world.hpp"

#include "json.hpp"

#include <set>
#include <string>

namespace tabv {

using Json = nlohmann::json;

// Strict view of one JSON object: every key must be consumed, and type
// mismatches or unknown keys raise ConfigError naming the full key path.
class JsonReader {
 public:
  JsonReader(const Json &j, std::string path);

  bool has(const std::string &key) const { return j_.contains(key); }
  const std::string &path() const { return path_; }
  std::string key_path(const std::string &key) const;

  // Optional keys leave `out` untouched when absent.
  void get(const std::string &key, double &out);
  void get(const std::string &key, int &out);
  void get(const std::string &key, bool &out);
  void get(const std::string &key, std::string &out);
  void get(const std::string &key, std::uint64_t &out);
  void get(const std::string &key, Vec2 &out);
  void get(const std::string &key, Vec3 &out);
  void get(const std::string &key, Vec4 &out);
  void get(const std::string &key, Mode &out);
  template <int N>
  void get_fixed(const std::string &key, Eigen::Matrix<double, N, 1> &out);

  // Marks the key as used and returns its raw value.
  const Json &raw(const std::string &key);
  JsonReader child(const std::string &key);
  // Throws on keys that were never read.
  void finish() const;

 private:
  const Json &at(const std::string &key, bool (Json::*is)() const noexcept, const char *expected);

  const Json &j_;
  std::string path_;
  std::set<std::string> used_;
};

void read_json(JsonReader &r, PhysicalParams &p);
void read_json(JsonReader &r, SearchConfig &c);
void read_json(JsonReader &r, OptimizerConfig &c);
void read_json(JsonReader &r, NmpcConfig &c);
void read_json(JsonReader &r, IndiConfig &c);
void read_json(JsonReader &r, SimConfig &c);
void read_json(JsonReader &r, FlatnessConfig &c);
void read_json(JsonReader &r, ForestParams &c);
void read_json(JsonReader &r, LemniscateParams &c);

Json to_json(const Vec3 &v);
Json to_json(const RunMetrics &m);
Json to_json(const SearchResult &r);
Json to_json(const CostBreakdown &c);
Json trajectory_json(const MincoTrajectory &traj, const std::vector<Mode> &modes);
Json cost_log_json(const OptimizeResult &r);

}  // namespace tabv
