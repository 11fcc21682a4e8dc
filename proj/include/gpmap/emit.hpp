#pragma once

// Text emitters for analysis results: CSV curves and baselines, cluster JSON,
// and cluster graphs as DOT or JSON.

#include <cstdio>
#include <ostream>
#include <span>
#include <string>

#include "json.hpp"

#include "gpmap/analysis.hpp"

namespace gpmap {

/// 12 significant digits, the precision of every printed real.
inline std::string format_real(double v) {
  if (v == 0.0) v = 0.0; // no "-0"
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_curves_csv(std::ostream& out, std::span<const DensityCurve> curves) {
  out << "rank,n,cum_viable,cum_total,rho,phi\n";
  for (const auto& c : curves) {
    for (std::size_t n = 0; n < c.phi.size(); ++n) {
      out << c.rank << ',' << n << ',' << c.cum_viable[n] << ',' << c.cum_total[n] << ','
          << format_real(c.rho[n]) << ',' << format_real(c.phi[n]) << '\n';
    }
  }
}

inline void write_mean_csv(std::ostream& out, std::span<const double> mean) {
  out << "n,phi_mean\n";
  for (std::size_t n = 0; n < mean.size(); ++n) out << n << ',' << format_real(mean[n]) << '\n';
}

inline void write_epistasis_csv(std::ostream& out, std::span<const DensityCurve> curves,
                                std::span<const double> phi_ne, double dead_band) {
  out << "rank,n,phi,phi_ne,sign,label\n";
  for (const auto& c : curves) {
    const auto signs = epistasis_sign(c.phi, phi_ne, dead_band);
    for (std::size_t n = 0; n < signs.size(); ++n) {
      out << c.rank << ',' << n << ',' << format_real(c.phi[n]) << ',' << format_real(phi_ne[n])
          << ',' << signs[n] << ',' << epistasis_label(signs[n]) << '\n';
    }
  }
}

inline void write_baselines_csv(std::ostream& out, std::span<const double> phi_min,
                                std::span<const double> phi_ne) {
  out << "n,phi_min,phi_ne\n";
  for (std::size_t n = 0; n < phi_min.size(); ++n) {
    out << n << ',' << format_real(phi_min[n]) << ',' << format_real(phi_ne[n]) << '\n';
  }
}

inline void write_robustness_csv(std::ostream& out, const Landscape& land,
                                 std::span<const std::size_t> indices,
                                 std::span<const std::size_t> robust) {
  out << "rank,genome,robustness\n";
  for (std::size_t i : indices) {
    out << land.viable()[i] << ',' << land.genome_of(i).letters() << ',' << robust[i] << '\n';
  }
}

inline nlohmann::ordered_json clusters_json(const ClusterSet& set) {
  nlohmann::ordered_json doc;
  doc["mode"] = cluster_mode_name(set.mode);
  auto comps = nlohmann::ordered_json::array();
  for (const auto& c : set.components) {
    comps.push_back({{"id", c.id},
                     {"size", c.size},
                     {"representative", c.representative},
                     {"edge_count", c.edge_count}});
  }
  doc["components"] = std::move(comps);
  return doc;
}

inline void write_graph_dot(std::ostream& out, const GraphDocument& g) {
  out << "graph cluster_" << g.component_id << " {\n";
  for (const auto& n : g.nodes) {
    out << "  \"" << n.rank << "\" [label=\"" << n.letters << "\", robustness=" << n.robustness
        << "];\n";
  }
  for (auto [a, b] : g.edges) out << "  \"" << a << "\" -- \"" << b << "\";\n";
  out << "}\n";
}

inline nlohmann::ordered_json graph_json(const GraphDocument& g) {
  nlohmann::ordered_json doc;
  doc["component"] = g.component_id;
  auto nodes = nlohmann::ordered_json::array();
  for (const auto& n : g.nodes) {
    nodes.push_back({{"rank", n.rank}, {"genome", n.letters}, {"robustness", n.robustness}});
  }
  auto edges = nlohmann::ordered_json::array();
  for (auto [a, b] : g.edges) edges.push_back({a, b});
  doc["nodes"] = std::move(nodes);
  doc["edges"] = std::move(edges);
  return doc;
}

} // namespace gpmap
