#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "poiaudit/common.hpp"

namespace poiaudit {

enum class Split { kTrain, kValid, kTest };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "valid") return Split::kValid;
  if (s == "test") return Split::kTest;
  throw ValidationError("unknown split tag: " + s);
}

// One raw record after ID re-indexing. time_seconds counts from whatever
// epoch the source file uses; no timezone conversion is applied.
struct CheckIn {
  int user = 0;
  int loc = 0;
  double time_seconds = 0.0;
  double lat = 0.0;
  double lon = 0.0;
};

// One check-in inside a trajectory. t is the time of day scaled to [0, 1).
struct Visit {
  int loc = 0;
  double t = 0.0;
};

struct Trajectory {
  int user = 0;
  std::vector<Visit> visits;
  Split split = Split::kTrain;
  long day = 0;  // segmentation bucket the trajectory came from
};

struct LocationInfo {
  std::string label;
  double lat = 0.0;
  double lon = 0.0;
};

struct MobilityDataset {
  std::vector<std::string> user_labels;
  std::vector<LocationInfo> locations;
  std::vector<Trajectory> trajectories;
  std::map<std::string, std::string> meta;

  int num_users() const { return static_cast<int>(user_labels.size()); }
  int num_locations() const { return static_cast<int>(locations.size()); }

  std::vector<int> split_indices(Split s) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(trajectories.size()); ++i) {
      if (trajectories[i].split == s) out.push_back(i);
    }
    return out;
  }

  long total_checkins() const {
    long n = 0;
    for (const auto& tr : trajectories) n += static_cast<long>(tr.visits.size());
    return n;
  }
};

struct DatasetStats {
  int pois = 0;
  long checkins = 0;
  int users = 0;
  long trajectories = 0;
  double avg_traj_len = 0.0;
};

inline DatasetStats dataset_stats(const MobilityDataset& ds) {
  DatasetStats st;
  st.pois = ds.num_locations();
  st.users = ds.num_users();
  st.trajectories = static_cast<long>(ds.trajectories.size());
  st.checkins = ds.total_checkins();
  st.avg_traj_len = st.trajectories > 0
                        ? static_cast<double>(st.checkins) / static_cast<double>(st.trajectories)
                        : 0.0;
  return st;
}

// ---------------------------------------------------------------------------
// Check-in file loading.
//
// Expected record layout (comma- or tab-separated):
//   user ID, check-in time, latitude, longitude, location ID
// The time column accepts either "YYYY-MM-DD[T ]HH:MM:SS[Z]" or a plain
// number of seconds. Lines starting with '#' are skipped; a first line whose
// latitude column is not numeric is treated as a header.
// ---------------------------------------------------------------------------

struct LoadOptions {
  char delimiter = '\0';  // '\0' = auto-detect (tab if present, else comma)
};

struct RawCheckins {
  std::vector<CheckIn> rows;  // file order, users/locations densely indexed
  std::vector<std::string> user_labels;
  std::vector<std::string> loc_labels;
  std::vector<double> loc_lat;  // first-seen coordinates per location
  std::vector<double> loc_lon;
};

namespace detail {

// Days since 1970-01-01 for a civil date (proleptic Gregorian).
inline long days_from_civil(long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

inline bool parse_iso_time(const std::string& s, double* out) {
  // YYYY-MM-DD[T ]HH:MM:SS with optional trailing 'Z'.
  if (s.size() < 19) return false;
  auto digit = [&](std::size_t i) { return s[i] >= '0' && s[i] <= '9'; };
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u, 11u, 12u, 14u, 15u, 17u, 18u}) {
    if (!digit(i)) return false;
  }
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':') {
    return false;
  }
  if (s.size() > 19 && !(s.size() == 20 && s[19] == 'Z')) return false;
  const long y = std::stol(s.substr(0, 4));
  const unsigned mo = static_cast<unsigned>(std::stoul(s.substr(5, 2)));
  const unsigned d = static_cast<unsigned>(std::stoul(s.substr(8, 2)));
  const int hh = std::stoi(s.substr(11, 2));
  const int mi = std::stoi(s.substr(14, 2));
  const int ss = std::stoi(s.substr(17, 2));
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || hh > 23 || mi > 59 || ss > 60) return false;
  *out = static_cast<double>(days_from_civil(y, mo, d)) * 86400.0 + hh * 3600.0 + mi * 60.0 + ss;
  return true;
}

inline bool parse_number(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

inline RawCheckins load_checkins(const std::string& path, const LoadOptions& opts = {}) {
  const std::string text = read_text(path);
  RawCheckins out;
  std::unordered_map<std::string, int> user_ids;
  std::unordered_map<std::string, int> loc_ids;

  char delim = opts.delimiter;
  long line_no = 0;
  bool first_data_line = true;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = (nl == std::string::npos) ? text.size() + 1 : nl + 1;
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (delim == '\0') delim = line.find('\t') != std::string::npos ? '\t' : ',';

    const std::vector<std::string> cols = detail::split_line(line, delim);
    if (cols.size() != 5) {
      if (first_data_line) {
        throw ValidationError("row " + std::to_string(line_no) + ": expected 5 columns, got " +
                              std::to_string(cols.size()));
      }
      throw ValidationError("row " + std::to_string(line_no) + ": expected 5 columns, got " +
                            std::to_string(cols.size()));
    }

    double lat = 0.0, lon = 0.0, t = 0.0;
    const bool lat_ok = detail::parse_number(cols[2], &lat);
    const bool lon_ok = detail::parse_number(cols[3], &lon);
    if (first_data_line && (!lat_ok || !lon_ok)) {
      // Header row.
      first_data_line = false;
      continue;
    }
    first_data_line = false;
    if (!lat_ok || !lon_ok) {
      throw ValidationError("row " + std::to_string(line_no) + ": unparseable coordinates");
    }
    if (!detail::parse_iso_time(cols[1], &t) && !detail::parse_number(cols[1], &t)) {
      throw ValidationError("row " + std::to_string(line_no) + ": unparseable timestamp '" +
                            cols[1] + "'");
    }

    auto user_it = user_ids.find(cols[0]);
    if (user_it == user_ids.end()) {
      user_it = user_ids.emplace(cols[0], static_cast<int>(out.user_labels.size())).first;
      out.user_labels.push_back(cols[0]);
    }
    auto loc_it = loc_ids.find(cols[4]);
    if (loc_it == loc_ids.end()) {
      loc_it = loc_ids.emplace(cols[4], static_cast<int>(out.loc_labels.size())).first;
      out.loc_labels.push_back(cols[4]);
      out.loc_lat.push_back(lat);
      out.loc_lon.push_back(lon);
    }
    out.rows.push_back(CheckIn{user_it->second, loc_it->second, t, lat, lon});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Preprocessing: occurrence filtering, day segmentation, splitting.
// ---------------------------------------------------------------------------

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

struct PreprocessConfig {
  int min_occurrence = 10;    // applies to users and to POIs
  double segment_hours = 24;  // trajectory bucket width
  int min_traj_len = 2;
  SplitRatios split;
  std::uint64_t seed = 1;
};

namespace detail {

// Largest-remainder apportionment of n into the three splits.
inline std::array<long, 3> split_counts(long n, const SplitRatios& r) {
  const double total = r.train + r.valid + r.test;
  require(total > 0.0, "split ratios must sum to a positive value");
  const double ideal[3] = {n * r.train / total, n * r.valid / total, n * r.test / total};
  std::array<long, 3> base{};
  long used = 0;
  for (int i = 0; i < 3; ++i) {
    base[static_cast<std::size_t>(i)] = static_cast<long>(std::floor(ideal[i]));
    used += base[static_cast<std::size_t>(i)];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return ideal[a] - std::floor(ideal[a]) > ideal[b] - std::floor(ideal[b]);
  });
  for (long k = 0; k < n - used; ++k) base[static_cast<std::size_t>(order[static_cast<std::size_t>(k % 3)])]++;
  return base;
}

inline void assign_splits(std::vector<Trajectory>& trajectories, const SplitRatios& ratios,
                          std::uint64_t seed) {
  const long n = static_cast<long>(trajectories.size());
  std::vector<long> idx(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  Rng rng(mix64(seed ^ 0x51C37A110C5ULL));
  rng.shuffle(idx);
  const auto counts = split_counts(n, ratios);
  long c = 0;
  for (long i = 0; i < counts[0]; ++i) trajectories[static_cast<std::size_t>(idx[static_cast<std::size_t>(c++)])].split = Split::kTrain;
  for (long i = 0; i < counts[1]; ++i) trajectories[static_cast<std::size_t>(idx[static_cast<std::size_t>(c++)])].split = Split::kValid;
  for (long i = 0; i < counts[2]; ++i) trajectories[static_cast<std::size_t>(idx[static_cast<std::size_t>(c++)])].split = Split::kTest;
}

}  // namespace detail

// Filters rare users/POIs and short day-groups to a joint fixed point, then
// segments the survivors into per-user day trajectories and assigns splits.
// Re-filtering after segmentation matters: dropping a short day-group can
// push a user or POI back under the occurrence threshold.
inline MobilityDataset preprocess(const RawCheckins& raw, const PreprocessConfig& cfg) {
  require(cfg.min_occurrence >= 0, "min_occurrence must be non-negative");
  require(cfg.segment_hours > 0, "segment_hours must be positive");
  require(cfg.min_traj_len >= 1, "min_traj_len must be at least 1");
  const double segment_seconds = cfg.segment_hours * 3600.0;

  const std::size_t n_rows = raw.rows.size();
  std::vector<char> alive(n_rows, 1);
  std::vector<long> day(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) {
    day[i] = static_cast<long>(std::floor(raw.rows[i].time_seconds / segment_seconds));
  }

  for (int iter = 0;; ++iter) {
    require(iter < 10000, "preprocess: filter did not reach a fixed point");
    bool changed = false;

    std::unordered_map<int, long> user_count;
    std::unordered_map<int, long> loc_count;
    for (std::size_t i = 0; i < n_rows; ++i) {
      if (!alive[i]) continue;
      user_count[raw.rows[i].user]++;
      loc_count[raw.rows[i].loc]++;
    }
    for (std::size_t i = 0; i < n_rows; ++i) {
      if (!alive[i]) continue;
      if (user_count[raw.rows[i].user] < cfg.min_occurrence ||
          loc_count[raw.rows[i].loc] < cfg.min_occurrence) {
        alive[i] = 0;
        changed = true;
      }
    }

    std::map<std::pair<int, long>, long> group_size;
    for (std::size_t i = 0; i < n_rows; ++i) {
      if (alive[i]) group_size[{raw.rows[i].user, day[i]}]++;
    }
    for (std::size_t i = 0; i < n_rows; ++i) {
      if (alive[i] && group_size[{raw.rows[i].user, day[i]}] < cfg.min_traj_len) {
        alive[i] = 0;
        changed = true;
      }
    }
    if (!changed) break;
  }

  // Dense re-indexing of survivors, preserving first-appearance order.
  std::vector<int> user_map(raw.user_labels.size(), -1);
  std::vector<int> loc_map(raw.loc_labels.size(), -1);
  MobilityDataset ds;
  for (std::size_t i = 0; i < n_rows; ++i) {
    if (!alive[i]) continue;
    const CheckIn& r = raw.rows[i];
    if (user_map[static_cast<std::size_t>(r.user)] < 0) {
      user_map[static_cast<std::size_t>(r.user)] = static_cast<int>(ds.user_labels.size());
      ds.user_labels.push_back(raw.user_labels[static_cast<std::size_t>(r.user)]);
    }
    if (loc_map[static_cast<std::size_t>(r.loc)] < 0) {
      loc_map[static_cast<std::size_t>(r.loc)] = static_cast<int>(ds.locations.size());
      ds.locations.push_back(LocationInfo{raw.loc_labels[static_cast<std::size_t>(r.loc)],
                                          raw.loc_lat[static_cast<std::size_t>(r.loc)],
                                          raw.loc_lon[static_cast<std::size_t>(r.loc)]});
    }
  }
  require(!ds.user_labels.empty(), "preprocess: no records survive filtering");

  // Group surviving rows into (user, day) trajectories; groups ordered by
  // re-indexed user then day, rows within a group by time with file order
  // breaking ties.
  std::map<std::pair<int, long>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n_rows; ++i) {
    if (alive[i]) {
      groups[{user_map[static_cast<std::size_t>(raw.rows[i].user)], day[i]}].push_back(i);
    }
  }
  for (auto& [key, rows] : groups) {
    std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
      return raw.rows[a].time_seconds < raw.rows[b].time_seconds;
    });
    Trajectory tr;
    tr.user = key.first;
    tr.day = key.second;
    for (std::size_t i : rows) {
      const double sec = raw.rows[i].time_seconds;
      const double second_of_day = sec - std::floor(sec / 86400.0) * 86400.0;
      tr.visits.push_back(
          Visit{loc_map[static_cast<std::size_t>(raw.rows[i].loc)], second_of_day / 86400.0});
    }
    ds.trajectories.push_back(std::move(tr));
  }

  detail::assign_splits(ds.trajectories, cfg.split, cfg.seed);
  ds.meta["source"] = "preprocess";
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic mobility data.
//
// Each user gets a designated common location plus a Zipf-weighted personal
// ranking over the rest; check-in times follow a Beta density over the day.
// Per-user activity rates differ so check-in volume is heterogeneous.
// ---------------------------------------------------------------------------

struct SynthConfig {
  int n_users = 200;
  int n_locations = 500;
  int n_days = 15;
  double zipf_exponent = 1.2;
  double p_common = 0.3;       // extra probability mass on the common location
  double geometric_p = 0.4;    // trajectory length = min_len + Geometric(p)
  int min_traj_len = 2;
  int beta_a = 3;              // time-of-day density Beta(a, b)
  int beta_b = 3;
  double activity_min = 0.15;  // per-user daily trajectory probability range
  double activity_max = 0.85;
  // Share of non-common check-ins the most active users draw from a shared
  // popularity ranking instead of their personal one. Busy users thus follow
  // mainstream patterns that other users' data also teaches, while sparse
  // users remain idiosyncratic outliers. Off by default: fully shared
  // patterns make busy users' trajectories so predictable that shadow-score
  // distributions degenerate.
  double mainstream_max = 0.0;
  // Per check-in probability of visiting a uniformly random POI instead of a
  // preferred one. Keeps every trajectory partly unpredictable, like real
  // mobility logs: without it some trajectories are predictable (or
  // impossible) under every model, their probabilities pin to the numeric
  // clamps, and likelihood-ratio variances collapse.
  double p_explore = 0.05;
  double center_lat = 40.7;
  double center_lon = -74.0;
  double extent_deg = 0.08;
  SplitRatios split;
  std::uint64_t seed = 1;
};

struct GroundTruth {
  std::vector<int> common_location;  // per user
};

struct SynthResult {
  MobilityDataset dataset;
  GroundTruth truth;
};

inline SynthResult synth_generate(const SynthConfig& cfg) {
  require(cfg.n_users > 0 && cfg.n_locations > 1 && cfg.n_days > 0,
          "synth_generate: users, locations, days must be positive");
  require(cfg.p_common >= 0.0 && cfg.p_common < 1.0, "synth_generate: p_common outside [0, 1)");
  require(cfg.p_explore >= 0.0 && cfg.p_explore < 1.0, "synth_generate: p_explore outside [0, 1)");
  Rng rng(mix64(cfg.seed ^ 0x5e11f0a57ULL));

  SynthResult out;
  MobilityDataset& ds = out.dataset;
  for (int u = 0; u < cfg.n_users; ++u) ds.user_labels.push_back("U" + std::to_string(u));
  for (int l = 0; l < cfg.n_locations; ++l) {
    ds.locations.push_back(LocationInfo{
        "L" + std::to_string(l),
        cfg.center_lat + rng.uniform(-cfg.extent_deg, cfg.extent_deg),
        cfg.center_lon + rng.uniform(-cfg.extent_deg, cfg.extent_deg)});
  }

  // Shared Zipf CDF over preference ranks.
  std::vector<double> zipf_cdf(static_cast<std::size_t>(cfg.n_locations));
  {
    double acc = 0.0;
    for (int r = 0; r < cfg.n_locations; ++r) {
      acc += std::pow(static_cast<double>(r + 1), -cfg.zipf_exponent);
      zipf_cdf[static_cast<std::size_t>(r)] = acc;
    }
    for (auto& v : zipf_cdf) v /= acc;
  }
  auto zipf_rank = [&](Rng& r) {
    const double u = r.uniform();
    return static_cast<int>(std::lower_bound(zipf_cdf.begin(), zipf_cdf.end(), u) -
                            zipf_cdf.begin());
  };

  // One popularity ranking shared by everyone. Check-ins from the busiest
  // users mix toward it, so their patterns also occur in other users' data.
  std::vector<int> global_pref(static_cast<std::size_t>(cfg.n_locations));
  for (int l = 0; l < cfg.n_locations; ++l) global_pref[static_cast<std::size_t>(l)] = l;
  {
    Rng grng = rng.fork(0);
    grng.shuffle(global_pref);
  }
  const double activity_span = cfg.activity_max - cfg.activity_min;

  for (int u = 0; u < cfg.n_users; ++u) {
    Rng urng = rng.fork(static_cast<std::uint64_t>(u) + 1);
    std::vector<int> pref(static_cast<std::size_t>(cfg.n_locations));
    for (int l = 0; l < cfg.n_locations; ++l) pref[static_cast<std::size_t>(l)] = l;
    urng.shuffle(pref);
    const int common = pref[0];
    out.truth.common_location.push_back(common);
    const double activity = urng.uniform(cfg.activity_min, cfg.activity_max);
    const double mainstream =
        cfg.mainstream_max *
        (activity_span > 0.0 ? (activity - cfg.activity_min) / activity_span : 0.0);

    for (int d = 0; d < cfg.n_days; ++d) {
      if (urng.uniform() >= activity) continue;
      const int len = cfg.min_traj_len + static_cast<int>(urng.geometric(cfg.geometric_p));
      std::vector<double> times(static_cast<std::size_t>(len));
      for (auto& t : times) t = urng.beta_int(cfg.beta_a, cfg.beta_b);
      std::sort(times.begin(), times.end());
      Trajectory tr;
      tr.user = u;
      tr.day = d;
      for (double t : times) {
        int loc;
        if (urng.uniform() < cfg.p_explore) {
          loc = static_cast<int>(urng.uniform_int(static_cast<std::uint64_t>(cfg.n_locations)));
        } else if (urng.uniform() < cfg.p_common) {
          loc = common;
        } else {
          const bool shared = urng.uniform() < mainstream;
          const std::size_t rank = static_cast<std::size_t>(zipf_rank(urng));
          loc = shared ? global_pref[rank] : pref[rank];
        }
        tr.visits.push_back(Visit{loc, t});
      }
      ds.trajectories.push_back(std::move(tr));
    }
  }
  require(!ds.trajectories.empty(), "synth_generate: configuration produced no trajectories");
  detail::assign_splits(ds.trajectories, cfg.split, cfg.seed);
  ds.meta["source"] = "synth";
  return out;
}

// ---------------------------------------------------------------------------
// Serialization.
// ---------------------------------------------------------------------------

inline nlohmann::json dataset_to_json(const MobilityDataset& ds) {
  nlohmann::json j;
  j["kind"] = "mobility_dataset";
  j["version"] = 1;
  j["users"] = ds.user_labels;
  auto& locs = j["locations"] = nlohmann::json::array();
  for (const auto& l : ds.locations) {
    locs.push_back({{"label", l.label}, {"lat", l.lat}, {"lon", l.lon}});
  }
  auto& trs = j["trajectories"] = nlohmann::json::array();
  for (const auto& tr : ds.trajectories) {
    nlohmann::json visits = nlohmann::json::array();
    for (const auto& v : tr.visits) visits.push_back({v.loc, v.t});
    trs.push_back({{"user", tr.user},
                   {"day", tr.day},
                   {"split", split_name(tr.split)},
                   {"visits", std::move(visits)}});
  }
  j["meta"] = ds.meta;
  return j;
}

inline MobilityDataset dataset_from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "mobility_dataset") {
    throw ValidationError("not a mobility_dataset artifact");
  }
  MobilityDataset ds;
  ds.user_labels = j.at("users").get<std::vector<std::string>>();
  for (const auto& l : j.at("locations")) {
    ds.locations.push_back(LocationInfo{l.at("label").get<std::string>(),
                                        l.at("lat").get<double>(), l.at("lon").get<double>()});
  }
  for (const auto& t : j.at("trajectories")) {
    Trajectory tr;
    tr.user = t.at("user").get<int>();
    tr.day = t.at("day").get<long>();
    tr.split = split_from_name(t.at("split").get<std::string>());
    for (const auto& v : t.at("visits")) {
      tr.visits.push_back(Visit{v.at(0).get<int>(), v.at(1).get<double>()});
    }
    require(tr.user >= 0 && tr.user < ds.num_users(), "trajectory user out of range");
    for (const auto& v : tr.visits) {
      require(v.loc >= 0 && v.loc < ds.num_locations(), "visit location out of range");
      require(v.t >= 0.0 && v.t <= 1.0, "visit time outside [0, 1]");
    }
    ds.trajectories.push_back(std::move(tr));
  }
  if (j.contains("meta")) ds.meta = j.at("meta").get<std::map<std::string, std::string>>();
  return ds;
}

inline void save_dataset(const std::filesystem::path& path, const MobilityDataset& ds) {
  save_text_atomic(path, dataset_to_json(ds).dump(1));
}

inline MobilityDataset load_dataset(const std::filesystem::path& path) {
  return dataset_from_json(nlohmann::json::parse(read_text(path)));
}

}  // namespace poiaudit
