#include "avalanche/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace avalanche::io {

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) known = true;
    if (!known) throw std::invalid_argument("unknown key in JSON object: " + it.key());
  }
}

}  // namespace

json spec_to_json(const LatticeSpec& spec) {
  json j;
  j["d"] = spec.dim();
  j["gamma"] = spec.gamma();
  if (spec.radius() >= 0) {
    j["radius"] = spec.radius();
  } else {
    json sites = json::array();
    for (const Coord& c : spec.points()) sites.push_back(c);
    j["sites"] = sites;
  }
  return j;
}

Lattice spec_from_json(const json& j) {
  reject_unknown_keys(j, {"d", "radius", "sites", "gamma"});
  if (!j.contains("d") || !j.contains("gamma"))
    throw std::invalid_argument("lattice JSON needs keys d and gamma");
  int d = j.at("d").get<int>();
  double gamma = j.at("gamma").get<double>();
  if (j.contains("radius") && j.contains("sites"))
    throw std::invalid_argument("lattice JSON: give either radius or sites");
  if (j.contains("radius")) return make_box(d, j.at("radius").get<int>(), gamma);
  if (j.contains("sites")) {
    std::vector<Coord> sites;
    for (const auto& s : j.at("sites")) sites.push_back(s.get<Coord>());
    return make_sites(d, std::move(sites), gamma);
  }
  throw std::invalid_argument("lattice JSON: give either radius or sites");
}

json height_config_to_json(const HeightConfig& c) {
  json j;
  j["spec"] = spec_to_json(*c.spec);
  j["heights"] = c.h;
  return j;
}

HeightConfig height_config_from_json(const json& j) {
  reject_unknown_keys(j, {"spec", "heights"});
  Lattice spec = spec_from_json(j.at("spec"));
  return HeightConfig(spec, j.at("heights").get<std::vector<double>>());
}

json discrete_config_to_json(const DiscreteConfig& c) {
  json j;
  j["spec"] = spec_to_json(*c.spec);
  j["heights"] = c.v;
  return j;
}

DiscreteConfig discrete_config_from_json(const json& j) {
  reject_unknown_keys(j, {"spec", "heights"});
  Lattice spec = spec_from_json(j.at("spec"));
  return DiscreteConfig(spec, j.at("heights").get<std::vector<int>>());
}

json tree_to_json(const SpanningTree& t) {
  json arr = json::array();
  for (int s = 0; s < t.spec->size(); ++s) {
    const ParentEdge& pe = t.parent[static_cast<size_t>(s)];
    json e;
    e["site"] = s;
    e["edge_kind"] = pe.special() ? "spec" : "ord";
    if (pe.special())
      e["direction_label"] = nullptr;
    else
      e["direction_label"] = pe.dir;
    arr.push_back(e);
  }
  return arr;
}

SpanningTree tree_from_json(const json& j, const Lattice& spec) {
  SpanningTree t;
  t.spec = spec;
  t.parent.assign(static_cast<size_t>(spec->size()), ParentEdge{});
  if (static_cast<int>(j.size()) != spec->size())
    throw std::invalid_argument("tree JSON: entry count does not match the lattice");
  for (const auto& e : j) {
    reject_unknown_keys(e, {"site", "edge_kind", "direction_label"});
    int s = e.at("site").get<int>();
    if (s < 0 || s >= spec->size()) throw std::invalid_argument("tree JSON: site out of range");
    ParentEdge pe;
    std::string kind = e.at("edge_kind").get<std::string>();
    if (kind == "spec") {
      pe.dir = kSpecialDir;
      pe.parent = kSink;
    } else if (kind == "ord") {
      pe.dir = e.at("direction_label").get<int>();
      if (pe.dir < 0 || pe.dir >= spec->degree())
        throw std::invalid_argument("tree JSON: direction label out of range");
      pe.parent = spec->neighbor(s, pe.dir);
    } else {
      throw std::invalid_argument("tree JSON: edge_kind must be ord or spec");
    }
    t.parent[static_cast<size_t>(s)] = pe;
  }
  return t;
}

json decay_fit_to_json(const DecayFit& f) {
  json j;
  j["gamma"] = f.gamma;
  json pts = json::array();
  for (const DecayPoint& p : f.points) {
    json pj;
    pj["r"] = p.distance;
    pj["cov"] = p.cov;
    pj["se"] = p.se;
    pj["used"] = p.used;
    pts.push_back(pj);
  }
  j["points"] = pts;
  j["ok"] = f.ok;
  if (f.ok) {
    j["rate"] = f.rate;
    j["rate_ci"] = {f.rate_ci_lo, f.rate_ci_hi};
  } else {
    j["note"] = f.note;
  }
  return j;
}

json stationarity_to_json(const StationarityReport& r) {
  json j;
  j["replicas"] = r.replicas;
  j["horizon"] = r.horizon;
  j["pvalues"] = r.pvalues;
  j["chisq"] = r.stats;
  j["min_pvalue"] = r.min_pvalue;
  j["bonferroni_threshold"] = r.bonferroni_threshold;
  j["pass"] = r.pass;
  return j;
}

json gamma_limit_to_json(const GammaLimitReport& r) {
  json j;
  j["samples"] = r.samples;
  j["tv_monotone"] = r.tv_monotone;
  j["kendall_tau"] = r.kendall_tau;
  j["note"] = "finite-volume proxy: fixed box, gamma = 0 run as reference";
  json entries = json::array();
  for (const GammaLimitEntry& e : r.entries) {
    json ej;
    ej["gamma"] = e.gamma;
    ej["tv_height_law"] = e.tv_height_law;
    ej["tv_avalanche_size"] = e.tv_avalanche_size;
    ej["addition_diff_fraction"] = e.addition_diff_fraction;
    ej["nesting_violations"] = e.nesting_violations;
    ej["height_hist"] = e.height_hist;
    entries.push_back(ej);
  }
  j["entries"] = entries;
  return j;
}

std::string csv_quote(const std::string& s) {
  bool needs = s.find_first_of(",\"\n") != std::string::npos;
  if (!needs) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string matrix_to_csv(const TopplingMatrix& m) {
  std::string out = "site";
  for (int j = 0; j < m.size(); ++j)
    out += "," + csv_quote(coord_to_string(m.spec()->point(j)));
  out += "\n";
  for (int i = 0; i < m.size(); ++i) {
    out += csv_quote(coord_to_string(m.spec()->point(i)));
    for (int j = 0; j < m.size(); ++j) out += "," + format_double(m.at(i, j));
    out += "\n";
  }
  return out;
}

std::string green_to_csv(const GreenTable& g) {
  std::string out = "x,y,value\n";
  for (int i = 0; i < g.spec->size(); ++i)
    for (int j = 0; j < g.spec->size(); ++j) {
      out += csv_quote(coord_to_string(g.spec->point(i)));
      out += ",";
      out += csv_quote(coord_to_string(g.spec->point(j)));
      out += ",";
      out += format_double(g.at(i, j));
      out += "\n";
    }
  return out;
}

std::string records_to_csv(const LatticeSpec& spec, std::span<const AvalancheRecord> recs) {
  std::string out = "origin,steps,avalanche_size,dissipated,max_count\n";
  char buf[128];
  for (const AvalancheRecord& r : recs) {
    std::snprintf(buf, sizeof(buf), "%s,%" PRIu64 ",%" PRIu64 ",%s,%" PRIu64 "\n",
                  csv_quote(coord_to_string(spec.point(r.origin))).c_str(), r.steps,
                  static_cast<uint64_t>(r.av_size), format_double(r.dissipated).c_str(),
                  r.max_count());
    out += buf;
  }
  return out;
}

std::string config_hash(const json& j) {
  std::string dump = j.dump();
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << content;
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace avalanche::io
