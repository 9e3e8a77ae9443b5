// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors

#include "isac/io.hpp"

#include <bit>
#include <cctype>
#include <cerrno>
#include <climits>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace isac {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "binary tensor layout is little-endian");

std::string fmt_g9(double v) {
  if (!std::isfinite(v)) throw numerical_error("fmt_g9: non-finite value");
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

double round_g9(double v) { return std::strtod(fmt_g9(v).c_str(), nullptr); }

namespace {

json jnum(double v) { return json(round_g9(v)); }

json jopt(const std::optional<double>& v) {
  return v ? jnum(*v) : json(nullptr);
}

std::string csv_opt(const std::optional<double>& v) {
  return v ? fmt_g9(*v) : std::string();
}

}  // namespace

// ----- array ----------------------------------------------------------------

std::string awv_json(const Awv& awv) {
  json arr = json::array();
  for (const cxd& w : awv.w)
    arr.push_back(json::array({jnum(std::abs(w)),
                               jnum(std::abs(w) > 0.0 ? std::arg(w) : 0.0)}));
  return arr.dump();
}

std::string codebook_json(const std::vector<Awv>& codebook) {
  std::string s = "[";
  for (std::size_t i = 0; i < codebook.size(); ++i) {
    if (i) s += ",";
    s += awv_json(codebook[i]);
  }
  return s + "]\n";
}

// ----- channel tensors ------------------------------------------------------

void write_tensor_bin(const std::string& path, const CxTensor& t) {
  require(!t.empty(), "write_tensor_bin: empty tensor");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  const std::uint64_t shape[3] = {static_cast<std::uint64_t>(t.rx()),
                                  static_cast<std::uint64_t>(t.tx()),
                                  static_cast<std::uint64_t>(t.nsc())};
  out.write(reinterpret_cast<const char*>(shape), sizeof(shape));
  // std::complex<double> is layout-compatible with double[2] {re, im}, and
  // the tensor stores slices contiguously in the documented order.
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(cxd)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

CxTensor read_tensor_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::uint64_t shape[3];
  in.read(reinterpret_cast<char*>(shape), sizeof(shape));
  if (!in) throw std::invalid_argument("tensor header truncated: " + path);
  for (std::uint64_t d : shape)
    if (d == 0 || d > 1'000'000)
      throw std::invalid_argument("corrupt tensor header: " + path);
  const std::uint64_t n = shape[0] * shape[1] * shape[2];
  if (n > 100'000'000)
    throw std::invalid_argument("tensor too large: " + path);
  CxTensor t(static_cast<int>(shape[0]), static_cast<int>(shape[1]),
             static_cast<int>(shape[2]));
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(n * sizeof(cxd)));
  if (!in || in.gcount() != static_cast<std::streamsize>(n * sizeof(cxd)))
    throw std::invalid_argument("tensor body truncated: " + path);
  in.peek();
  if (!in.eof())
    throw std::invalid_argument("trailing bytes after tensor: " + path);
  return t;
}

std::string tensor_json(const CxTensor& t) {
  require(!t.empty(), "tensor_json: empty tensor");
  json j;
  j["shape"] = {t.rx(), t.tx(), t.nsc()};
  json re = json::array(), im = json::array();
  for (std::size_t i = 0; i < t.size(); ++i) {
    re.push_back(jnum(t.data()[i].real()));
    im.push_back(jnum(t.data()[i].imag()));
  }
  j["re"] = std::move(re);
  j["im"] = std::move(im);
  return j.dump() + "\n";
}

CxTensor tensor_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("tensor JSON: ") + e.what());
  }
  try {
    if (!j.contains("shape") || !j["shape"].is_array() ||
        j["shape"].size() != 3)
      throw std::invalid_argument("tensor JSON: shape must be [rx, tx, nsc]");
    const int rx = j["shape"][0].get<int>();
    const int tx = j["shape"][1].get<int>();
    const int nsc = j["shape"][2].get<int>();
    if (rx <= 0 || tx <= 0 || nsc <= 0)
      throw std::invalid_argument("tensor JSON: nonpositive dimension");
    const std::size_t n = static_cast<std::size_t>(rx) * tx * nsc;
    if (!j.contains("re") || !j.contains("im") || j["re"].size() != n ||
        j["im"].size() != n)
      throw std::invalid_argument("tensor JSON: re/im length mismatch");
    CxTensor t(rx, tx, nsc);
    for (std::size_t i = 0; i < n; ++i)
      t.data()[i] = cxd(j["re"][i].get<double>(), j["im"][i].get<double>());
    return t;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("tensor JSON: ") + e.what());
  }
}

// ----- probing --------------------------------------------------------------

std::string sweep_report_json(const SweepReport& r) {
  json j;
  json entries = json::array();
  for (const SweepEntry& e : r.entries)
    entries.push_back({{"sector", e.sector}, {"rssi_db", jnum(e.rssi_db)}});
  j["entries"] = std::move(entries);
  j["best_sector"] = r.best_sector;
  j["best_rssi_db"] = jnum(r.best_rssi_db);
  return j.dump() + "\n";
}

std::string sweep_report_csv(const SweepReport& r) {
  std::string s = "sector,rssi_db,best\n";
  for (const SweepEntry& e : r.entries)
    s += std::to_string(e.sector) + "," + fmt_g9(e.rssi_db) + "," +
         (e.sector == r.best_sector ? "1" : "0") + "\n";
  return s;
}

// ----- cancellation ---------------------------------------------------------

namespace {

json cancellation_row_json(const CancellationReport& r) {
  return json{{"ti_before_db", jnum(r.ti_before_db)},
              {"ti_after_null_db", jnum(r.ti_after_null_db)},
              {"ti_after_digital_db", jnum(r.ti_after_digital_db)},
              {"sensing_before_db", jnum(r.sensing_before_db)},
              {"sensing_after_db", jnum(r.sensing_after_db)},
              {"noise_floor_db", jnum(r.noise_floor_db)},
              {"iterations", r.iterations},
              {"feasible", r.feasible},
              {"converged", r.converged}};
}

}  // namespace

std::string cancellation_csv(const std::vector<CancellationReport>& rows) {
  std::string s =
      "ti_before_db,ti_after_null_db,ti_after_digital_db,sensing_before_db,"
      "sensing_after_db,noise_floor_db,iterations,feasible,converged\n";
  for (const CancellationReport& r : rows)
    s += fmt_g9(r.ti_before_db) + "," + fmt_g9(r.ti_after_null_db) + "," +
         fmt_g9(r.ti_after_digital_db) + "," + fmt_g9(r.sensing_before_db) +
         "," + fmt_g9(r.sensing_after_db) + "," + fmt_g9(r.noise_floor_db) +
         "," + std::to_string(r.iterations) + "," +
         (r.feasible ? "1" : "0") + "," + (r.converged ? "1" : "0") + "\n";
  return s;
}

std::string cancellation_json(const std::vector<CancellationReport>& rows) {
  json arr = json::array();
  for (const CancellationReport& r : rows)
    arr.push_back(cancellation_row_json(r));
  return arr.dump() + "\n";
}

// ----- fusion ---------------------------------------------------------------

std::string xyz_text(const std::vector<Point3>& pts) {
  std::string s;
  char buf[80];
  for (const Point3& p : pts) {
    std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f\n", p.x_m, p.y_m, p.z_m);
    s += buf;
  }
  return s;
}

std::string pointcloud_json(const std::vector<Point3>& pts) {
  json arr = json::array();
  for (const Point3& p : pts)
    arr.push_back(json::array({jnum(p.x_m), jnum(p.y_m), jnum(p.z_m)}));
  return arr.dump() + "\n";
}

std::string track_csv(const std::vector<TrackPoint>& track) {
  std::string s = "t,x,y,vx,vy,trace_p\n";
  for (const TrackPoint& p : track)
    s += fmt_g9(p.t_s) + "," + fmt_g9(p.x_m) + "," + fmt_g9(p.y_m) + "," +
         fmt_g9(p.vx_mps) + "," + fmt_g9(p.vy_mps) + "," + fmt_g9(p.trace_p) +
         "\n";
  return s;
}

std::string track_json(const std::vector<TrackPoint>& track) {
  json arr = json::array();
  for (const TrackPoint& p : track)
    arr.push_back({{"t_s", jnum(p.t_s)},
                   {"x_m", jnum(p.x_m)},
                   {"y_m", jnum(p.y_m)},
                   {"vx_mps", jnum(p.vx_mps)},
                   {"vy_mps", jnum(p.vy_mps)},
                   {"trace_p", jnum(p.trace_p)}});
  return arr.dump() + "\n";
}

// ----- sim ------------------------------------------------------------------

namespace {

json metrics_to_json(const Metrics& m) {
  json j;
  j["scheduler"] = scheduler_name(m.scheduler);
  j["span_slots"] = m.span_slots;
  j["n_slots"] = m.n_slots;
  j["mean_throughput_bps"] = jnum(m.mean_throughput_bps);
  j["mean_s_snr_db"] = jnum(m.mean_s_snr_db);
  j["min_budget_margin_db"] = jnum(m.min_budget_margin_db);
  j["tracking_rmse_m"] = jopt(m.tracking_rmse_m);
  json ut = json::array(), us = json::array();
  for (double v : m.ue_throughput_bps) ut.push_back(jnum(v));
  for (double v : m.ue_snr_db) us.push_back(jnum(v));
  j["ue_throughput_bps"] = std::move(ut);
  j["ue_snr_db"] = std::move(us);
  json sensing = json::array();
  for (const SubjectSensing& s : m.sensing)
    sensing.push_back({{"subject", s.subject},
                       {"duty", jnum(s.duty)},
                       {"s_snr_db", jnum(s.s_snr_db)},
                       {"range_error_m", jopt(s.range_error_m)},
                       {"bearing_error_rad", jopt(s.bearing_error_rad)},
                       {"rate_bpm", jopt(s.rate_bpm)},
                       {"rate_error_bpm", jopt(s.rate_error_bpm)}});
  j["sensing"] = std::move(sensing);
  json track = json::array();
  for (const TrackPoint& p : m.track)
    track.push_back({{"t_s", jnum(p.t_s)},
                     {"x_m", jnum(p.x_m)},
                     {"y_m", jnum(p.y_m)},
                     {"vx_mps", jnum(p.vx_mps)},
                     {"vy_mps", jnum(p.vy_mps)},
                     {"trace_p", jnum(p.trace_p)}});
  j["track"] = std::move(track);
  json canc = json::array();
  for (const CancellationReport& r : m.cancellation)
    canc.push_back(cancellation_row_json(r));
  j["cancellation"] = std::move(canc);
  return j;
}

}  // namespace

std::string metrics_json(const Metrics& m) {
  return metrics_to_json(m).dump() + "\n";
}

std::string metrics_csv_header() {
  return "scheduler,span_slots,mean_throughput_bps,mean_s_snr_db,rate_bpm,"
         "rate_error_bpm,range_error_m,bearing_error_rad,"
         "min_budget_margin_db\n";
}

std::string metrics_csv_row(const Metrics& m) {
  // The comparative table reports the first subject; the JSON summary has
  // the full per-subject breakdown.
  const SubjectSensing* s = m.sensing.empty() ? nullptr : &m.sensing[0];
  std::string row = std::string(scheduler_name(m.scheduler)) + "," +
                    std::to_string(m.span_slots) + "," +
                    fmt_g9(m.mean_throughput_bps) + "," +
                    fmt_g9(m.mean_s_snr_db) + ",";
  row += s ? csv_opt(s->rate_bpm) : std::string();
  row += ",";
  row += s ? csv_opt(s->rate_error_bpm) : std::string();
  row += ",";
  row += s ? csv_opt(s->range_error_m) : std::string();
  row += ",";
  row += s ? csv_opt(s->bearing_error_rad) : std::string();
  row += "," + fmt_g9(m.min_budget_margin_db) + "\n";
  return row;
}

std::string baselines_csv(const BaselineTable& t) {
  return metrics_csv_header() + metrics_csv_row(t.bcset) +
         metrics_csv_row(t.rr) + metrics_csv_row(t.so) + metrics_csv_row(t.co);
}

std::string baselines_json(const BaselineTable& t) {
  json j;
  j["bcset"] = metrics_to_json(t.bcset);
  j["rr"] = metrics_to_json(t.rr);
  j["so"] = metrics_to_json(t.so);
  j["co"] = metrics_to_json(t.co);
  return j.dump() + "\n";
}

std::string trend_csv(const TrendTable& t) {
  std::string s = "setting,mean_throughput_bps,mean_s_snr_db\n";
  for (const TrendRow& r : t.rows)
    s += std::to_string(r.setting) + "," + fmt_g9(r.mean_throughput_bps) +
         "," + fmt_g9(r.mean_s_snr_db) + "\n";
  return s;
}

std::string trend_json(const TrendTable& t) {
  json j;
  j["case"] = t.case_id;
  json rows = json::array();
  for (const TrendRow& r : t.rows)
    rows.push_back({{"setting", r.setting},
                    {"mean_throughput_bps", jnum(r.mean_throughput_bps)},
                    {"mean_s_snr_db", jnum(r.mean_s_snr_db)}});
  j["rows"] = std::move(rows);
  return j.dump() + "\n";
}

std::string gesture_csv(const std::vector<double>& trace, double fs_hz) {
  require(fs_hz > 0.0, "gesture_csv: fs_hz must be positive");
  std::string s = "t_s,displacement_m\n";
  for (std::size_t k = 0; k < trace.size(); ++k)
    s += fmt_g9(k / fs_hz) + "," + fmt_g9(trace[k]) + "\n";
  return s;
}

// ----- scenario config ------------------------------------------------------

namespace {

struct KeyValue {
  std::string value;
  int line = 0;
  bool used = false;
};

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

class ConfigReader {
 public:
  explicit ConfigReader(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      ++n;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string body = trim(line);
      if (body.empty()) continue;
      const std::size_t eq = body.find('=');
      if (eq == std::string::npos) {
        error(n, "expected 'key = value'");
        continue;
      }
      const std::string key = trim(body.substr(0, eq));
      const std::string value = trim(body.substr(eq + 1));
      if (key.empty() || value.empty()) {
        error(n, "expected 'key = value'");
        continue;
      }
      if (entries_.count(key)) {
        error(n, "duplicate key '" + key + "'");
        continue;
      }
      entries_[key] = {value, n, false};
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  void take_double(const std::string& key, double& out) {
    const KeyValue* kv = take(key);
    if (!kv) return;
    char* end = nullptr;
    const double v = std::strtod(kv->value.c_str(), &end);
    if (end == kv->value.c_str() || *end != '\0' || !std::isfinite(v))
      error(kv->line, "bad number for '" + key + "': " + kv->value);
    else
      out = v;
  }

  void take_int(const std::string& key, int& out) {
    const KeyValue* kv = take(key);
    if (!kv) return;
    long long v;
    if (!parse_ll(kv->value, v) || v < INT_MIN || v > INT_MAX)
      error(kv->line, "bad integer for '" + key + "': " + kv->value);
    else
      out = static_cast<int>(v);
  }

  void take_seed(const std::string& key, std::uint64_t& out, bool& present) {
    const KeyValue* kv = take(key);
    if (!kv) return;
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(kv->value.c_str(), &end, 10);
    if (end == kv->value.c_str() || *end != '\0' || errno == ERANGE ||
        kv->value[0] == '-')
      error(kv->line, "bad seed '" + kv->value + "'");
    else {
      out = v;
      present = true;
    }
  }

  void take_int_list(const std::string& key, std::vector<int>& out) {
    const KeyValue* kv = take(key);
    if (!kv) return;
    std::vector<int> vals;
    std::istringstream in(kv->value);
    std::string tok;
    bool ok = true;
    while (std::getline(in, tok, ',')) {
      long long v;
      if (!parse_ll(trim(tok), v) || v < 1 || v > 1'000'000) {
        ok = false;
        break;
      }
      vals.push_back(static_cast<int>(v));
    }
    if (!ok || vals.empty())
      error(kv->line, "bad list for '" + key + "': " + kv->value);
    else
      out = vals;
  }

  void take_scheduler(const std::string& key, Scheduler& out) {
    const KeyValue* kv = take(key);
    if (!kv) return;
    try {
      out = parse_scheduler(kv->value);
    } catch (const std::invalid_argument& e) {
      error(kv->line, e.what());
    }
  }

  void take_enum(const std::string& key, std::string& out,
                 const std::vector<std::string>& allowed) {
    const KeyValue* kv = take(key);
    if (!kv) return;
    for (const std::string& a : allowed)
      if (kv->value == a) {
        out = kv->value;
        return;
      }
    error(kv->line, "bad value for '" + key + "': " + kv->value);
  }

  // Highest index used by a "kind.N.field" key, or -1.
  int group_extent(const std::string& kind) {
    int hi = -1;
    for (const auto& [key, kv] : entries_) {
      int idx;
      std::string field;
      if (split_indexed(key, kind, idx, field)) hi = std::max(hi, idx);
    }
    return hi;
  }

  bool group_present(const std::string& kind, int idx) {
    for (const auto& [key, kv] : entries_) {
      int i;
      std::string field;
      if (split_indexed(key, kind, i, field) && i == idx) return true;
    }
    return false;
  }

  void finish() {
    for (const auto& [key, kv] : entries_)
      if (!kv.used) error(kv.line, "unknown key '" + key + "'");
    if (!errors_.empty()) {
      std::string msg = "config error: " + errors_[0];
      for (std::size_t i = 1; i < errors_.size(); ++i)
        msg += "; " + errors_[i];
      throw std::invalid_argument(msg);
    }
  }

  void error(int line, const std::string& what) {
    errors_.push_back("line " + std::to_string(line) + ": " + what);
  }

  static bool split_indexed(const std::string& key, const std::string& kind,
                            int& idx, std::string& field) {
    if (key.rfind(kind + ".", 0) != 0) return false;
    const std::size_t a = kind.size() + 1;
    const std::size_t b = key.find('.', a);
    if (b == std::string::npos || b == a) return false;
    for (std::size_t i = a; i < b; ++i)
      if (!std::isdigit(static_cast<unsigned char>(key[i]))) return false;
    idx = std::atoi(key.substr(a, b - a).c_str());
    field = key.substr(b + 1);
    return !field.empty();
  }

 private:
  const KeyValue* take(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  static bool parse_ll(const std::string& s, long long& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    errno = 0;
    out = std::strtoll(s.c_str(), &end, 10);
    return end != s.c_str() && *end == '\0' && errno != ERANGE;
  }

  std::map<std::string, KeyValue> entries_;
  std::vector<std::string> errors_;
};

}  // namespace

ParsedConfig parse_config(const std::string& text) {
  ConfigReader r(text);
  ParsedConfig out;
  ScenarioConfig& cfg = out.config;

  r.take_seed("seed", cfg.seed, out.has_seed);
  r.take_scheduler("scheduler", cfg.scheduler);
  r.take_double("slot_duration_s", cfg.slot_duration_s);
  r.take_double("duration_s", cfg.duration_s);
  r.take_double("efficiency", cfg.efficiency);
  r.take_double("cap_bps", cfg.cap_bps);
  r.take_double("comm_noise_db", cfg.comm_noise_db);
  r.take_double("band_lo_hz", cfg.band_lo_hz);
  r.take_double("band_hi_hz", cfg.band_hi_hz);
  r.take_double("rebeam_interval_s", cfg.rebeam_interval_s);
  r.take_double("track_q", cfg.track_q);

  r.take_double("ofdm.carrier_hz", cfg.ofdm.carrier_hz);
  r.take_double("ofdm.bandwidth_hz", cfg.ofdm.bandwidth_hz);
  r.take_int("ofdm.n_subcarriers", cfg.ofdm.n_subcarriers);
  r.take_double("ofdm.slow_time_hz", cfg.ofdm.slow_time_hz);

  r.take_int("sched.k_r", cfg.sched.k_r);
  r.take_int("sched.k_d", cfg.sched.k_d);
  r.take_double("sched.range_extent_m", cfg.sched.range_extent_m);
  r.take_int("sched.ue_capacity", cfg.sched.ue_capacity);

  r.take_int("pipeline.n_packets", cfg.pipeline.n_packets);

  r.take_double("comm.k_factor_db", cfg.comm.k_factor_db);
  r.take_int("comm.n_scatter_paths", cfg.comm.n_scatter_paths);
  r.take_double("comm.excess_delay_s", cfg.comm.excess_delay_s);

  r.take_int("sweep.trials", cfg.sweep.trials);
  r.take_int("sweep.n_subjects", cfg.sweep.n_subjects);
  r.take_double("sweep.area_range_m", cfg.sweep.area_range_m);
  r.take_double("sweep.snr_ref_db", cfg.sweep.snr_ref_db);
  r.take_double("sweep.ref_range_m", cfg.sweep.ref_range_m);
  r.take_double("sweep.sense_ref_db", cfg.sweep.sense_ref_db);
  r.take_double("sweep.gesture_duration_s", cfg.sweep.gesture_duration_s);
  r.take_int_list("sweep.ue_counts", cfg.sweep.ue_counts);
  r.take_int_list("sweep.ap_counts", cfg.sweep.ap_counts);

  // Indexed entity groups. Any key under kind.N creates entity N; indices
  // must be contiguous from 0.
  auto node_fields = [&](const std::string& kind, int i, Node& n,
                         bool chains) {
    const std::string p = kind + "." + std::to_string(i) + ".";
    double x = n.position.x(), y = n.position.y(), z = n.position.z();
    r.take_double(p + "x", x);
    r.take_double(p + "y", y);
    r.take_double(p + "z", z);
    n.position = {x, y, z};
    double bs_deg = rad2deg(n.boresight_rad);
    const bool had_bs = r.has(p + "boresight_deg");
    r.take_double(p + "boresight_deg", bs_deg);
    if (had_bs) n.boresight_rad = deg2rad(bs_deg);
    r.take_int(p + "elements", n.array.elements);
    if (chains) {
      r.take_int(p + "tx_chains", n.n_tx_chains);
      r.take_int(p + "rx_chains", n.n_rx_chains);
    }
    return had_bs;
  };

  const int n_aps = r.group_extent("ap") + 1;
  for (int i = 0; i < n_aps; ++i) {
    if (!r.group_present("ap", i)) {
      r.error(0, "ap indices must be contiguous from 0 (missing ap." +
                     std::to_string(i) + ")");
      continue;
    }
    Node ap;
    node_fields("ap", i, ap, true);
    cfg.scene.aps.push_back(ap);
  }

  const int n_ues = r.group_extent("ue") + 1;
  std::vector<bool> ue_had_bs;
  for (int i = 0; i < n_ues; ++i) {
    if (!r.group_present("ue", i)) {
      r.error(0, "ue indices must be contiguous from 0 (missing ue." +
                     std::to_string(i) + ")");
      continue;
    }
    Node ue;
    ue_had_bs.push_back(node_fields("ue", i, ue, false));
    cfg.scene.ues.push_back(ue);
  }
  // UEs default to facing the first AP.
  for (std::size_t i = 0; i < cfg.scene.ues.size(); ++i)
    if (!ue_had_bs[i] && !cfg.scene.aps.empty())
      cfg.scene.ues[i].boresight_rad =
          azimuth_of(cfg.scene.aps[0].position - cfg.scene.ues[i].position);

  const int n_subj = r.group_extent("subject") + 1;
  for (int i = 0; i < n_subj; ++i) {
    if (!r.group_present("subject", i)) {
      r.error(0, "subject indices must be contiguous from 0 (missing subject." +
                     std::to_string(i) + ")");
      continue;
    }
    const std::string p = "subject." + std::to_string(i) + ".";
    Subject s;
    double x = 0, y = 0, z = 0;
    r.take_double(p + "x", x);
    r.take_double(p + "y", y);
    r.take_double(p + "z", z);
    s.position = {x, y, z};
    r.take_double(p + "rcs", s.rcs);
    r.take_double(p + "mag_mod_per_m", s.mag_mod_per_m);
    std::string kind = "static";
    r.take_enum(p + "motion", kind, {"static", "velocity", "sinusoid"});
    if (kind == "velocity")
      s.motion.kind = Motion::Kind::ConstantVelocity;
    else if (kind == "sinusoid")
      s.motion.kind = Motion::Kind::Sinusoid;
    double vx = 0, vy = 0, vz = 0, ax = 0, ay = 0, az = 0;
    r.take_double(p + "vx", vx);
    r.take_double(p + "vy", vy);
    r.take_double(p + "vz", vz);
    s.motion.velocity = {vx, vy, vz};
    r.take_double(p + "freq_hz", s.motion.freq_hz);
    r.take_double(p + "amp_x", ax);
    r.take_double(p + "amp_y", ay);
    r.take_double(p + "amp_z", az);
    s.motion.amplitude = {ax, ay, az};
    r.take_double(p + "phase", s.motion.phase);
    cfg.scene.subjects.push_back(s);
  }

  r.finish();
  return out;
}

ParsedConfig load_config(const std::string& path) {
  return parse_config(read_text_file(path));
}

std::string config_text(const ScenarioConfig& cfg) {
  std::string s;
  auto kv = [&s](const std::string& key, const std::string& value) {
    s += key + " = " + value + "\n";
  };
  auto kd = [&](const std::string& key, double v) { kv(key, fmt_g9(v)); };
  auto ki = [&](const std::string& key, long long v) {
    kv(key, std::to_string(v));
  };

  kv("seed", std::to_string(cfg.seed));
  kv("scheduler", scheduler_name(cfg.scheduler));
  kd("slot_duration_s", cfg.slot_duration_s);
  kd("duration_s", cfg.duration_s);
  kd("efficiency", cfg.efficiency);
  kd("cap_bps", cfg.cap_bps);
  kd("comm_noise_db", cfg.comm_noise_db);
  kd("band_lo_hz", cfg.band_lo_hz);
  kd("band_hi_hz", cfg.band_hi_hz);
  kd("rebeam_interval_s", cfg.rebeam_interval_s);
  kd("track_q", cfg.track_q);

  kd("ofdm.carrier_hz", cfg.ofdm.carrier_hz);
  kd("ofdm.bandwidth_hz", cfg.ofdm.bandwidth_hz);
  ki("ofdm.n_subcarriers", cfg.ofdm.n_subcarriers);
  kd("ofdm.slow_time_hz", cfg.ofdm.slow_time_hz);

  ki("sched.k_r", cfg.sched.k_r);
  ki("sched.k_d", cfg.sched.k_d);
  kd("sched.range_extent_m", cfg.sched.range_extent_m);
  ki("sched.ue_capacity", cfg.sched.ue_capacity);

  ki("pipeline.n_packets", cfg.pipeline.n_packets);

  kd("comm.k_factor_db", cfg.comm.k_factor_db);
  ki("comm.n_scatter_paths", cfg.comm.n_scatter_paths);
  kd("comm.excess_delay_s", cfg.comm.excess_delay_s);

  ki("sweep.trials", cfg.sweep.trials);
  ki("sweep.n_subjects", cfg.sweep.n_subjects);
  kd("sweep.area_range_m", cfg.sweep.area_range_m);
  kd("sweep.snr_ref_db", cfg.sweep.snr_ref_db);
  kd("sweep.ref_range_m", cfg.sweep.ref_range_m);
  kd("sweep.sense_ref_db", cfg.sweep.sense_ref_db);
  kd("sweep.gesture_duration_s", cfg.sweep.gesture_duration_s);
  auto list = [](const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ",";
      out += std::to_string(v[i]);
    }
    return out;
  };
  kv("sweep.ue_counts", list(cfg.sweep.ue_counts));
  kv("sweep.ap_counts", list(cfg.sweep.ap_counts));

  for (std::size_t i = 0; i < cfg.scene.aps.size(); ++i) {
    const Node& n = cfg.scene.aps[i];
    const std::string p = "ap." + std::to_string(i) + ".";
    kd(p + "x", n.position.x());
    kd(p + "y", n.position.y());
    kd(p + "z", n.position.z());
    kd(p + "boresight_deg", rad2deg(n.boresight_rad));
    ki(p + "elements", n.array.elements);
    ki(p + "tx_chains", n.n_tx_chains);
    ki(p + "rx_chains", n.n_rx_chains);
  }
  for (std::size_t i = 0; i < cfg.scene.ues.size(); ++i) {
    const Node& n = cfg.scene.ues[i];
    const std::string p = "ue." + std::to_string(i) + ".";
    kd(p + "x", n.position.x());
    kd(p + "y", n.position.y());
    kd(p + "z", n.position.z());
    kd(p + "boresight_deg", rad2deg(n.boresight_rad));
    ki(p + "elements", n.array.elements);
  }
  for (std::size_t i = 0; i < cfg.scene.subjects.size(); ++i) {
    const Subject& su = cfg.scene.subjects[i];
    const std::string p = "subject." + std::to_string(i) + ".";
    kd(p + "x", su.position.x());
    kd(p + "y", su.position.y());
    kd(p + "z", su.position.z());
    kd(p + "rcs", su.rcs);
    kd(p + "mag_mod_per_m", su.mag_mod_per_m);
    const char* kind = su.motion.kind == Motion::Kind::Static ? "static"
                       : su.motion.kind == Motion::Kind::ConstantVelocity
                           ? "velocity"
                           : "sinusoid";
    kv(p + "motion", kind);
    kd(p + "vx", su.motion.velocity.x());
    kd(p + "vy", su.motion.velocity.y());
    kd(p + "vz", su.motion.velocity.z());
    kd(p + "freq_hz", su.motion.freq_hz);
    kd(p + "amp_x", su.motion.amplitude.x());
    kd(p + "amp_y", su.motion.amplitude.y());
    kd(p + "amp_z", su.motion.amplitude.z());
    kd(p + "phase", su.motion.phase);
  }
  return s;
}

// ----- file helpers ---------------------------------------------------------

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in) throw std::runtime_error("read failed: " + path);
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << data;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace isac
