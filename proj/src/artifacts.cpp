#include "pdectrl/artifacts.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace pdectrl::artifacts {

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json strip_volatile(json j) {
  static const std::vector<std::string> volatile_keys = {
      "wall_ms", "timing", "nn_avg_ms", "mpc_avg_ms", "speedup"};
  if (j.is_object()) {
    for (const auto& k : volatile_keys) j.erase(k);
    for (auto& [key, value] : j.items()) value = strip_volatile(value);
  } else if (j.is_array()) {
    for (auto& value : j) value = strip_volatile(value);
  }
  return j;
}

std::string artifact_hash(const json& j) { return fnv1a_hex(strip_volatile(j).dump()); }

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (size_t i = 0; i < header.size(); ++i)
    out << header[i] << (i + 1 < header.size() ? "," : "\n");
  out << std::setprecision(17);
  for (const auto& row : rows)
    for (size_t i = 0; i < row.size(); ++i)
      out << row[i] << (i + 1 < row.size() ? "," : "\n");
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

json policy_to_json(const nn::Policy& p) {
  json layers = json::array();
  for (size_t i = 0; i < p.W.size(); ++i)
    layers.push_back({{"W", matrix_to_json(p.W[i])}, {"b", vector_to_json(p.b[i])}});
  return {{"layers", layers},
          {"output", {{"W", matrix_to_json(p.W_out)}, {"b", p.b_out}}},
          {"activation", "tanh"}};
}

nn::Policy policy_from_json(const json& j) {
  if (j.at("activation").get<std::string>() != "tanh")
    throw std::runtime_error("unsupported activation");
  nn::Policy p;
  for (const auto& layer : j.at("layers")) {
    p.W.push_back(matrix_from_json(layer.at("W")));
    p.b.push_back(vector_from_json(layer.at("b")));
  }
  p.W_out = matrix_from_json(j.at("output").at("W")).row(0);
  p.b_out = j.at("output").at("b").get<double>();
  return p;
}

json certificate_to_json(const certify::CertificateIterate& c) {
  return {{"H1", matrix_to_json(c.H1)},
          {"H2", vector_to_json(c.H2)},
          {"L1", matrix_to_json(c.L1)},
          {"L2", matrix_to_json(c.L2)},
          {"L3", matrix_to_json(c.L3)},
          {"L4", matrix_to_json(c.L4)},
          {"P", matrix_to_json(c.P())},
          {"Lambda", vector_to_json(c.Lambda())}};
}

certify::CertificateIterate certificate_from_json(const json& j) {
  certify::CertificateIterate c;
  c.H1 = matrix_from_json(j.at("H1"));
  c.H2 = vector_from_json(j.at("H2"));
  c.L1 = matrix_from_json(j.at("L1")).row(0);
  c.L2 = matrix_from_json(j.at("L2")).row(0);
  c.L3 = matrix_from_json(j.at("L3"));
  c.L4 = matrix_from_json(j.at("L4"));
  return c;
}

std::string svg_line_plot(const std::vector<Series>& series, const std::string& title,
                          const std::string& xlabel, const std::string& ylabel, bool log_y) {
  const int W = 720, H = 480, ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      double y = s.y[i];
      if (log_y) {
        if (y <= 0.0) continue;
        y = std::log10(y);
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmin > xmax) {
    xmin = 0.0;
    xmax = 1.0;
  }
  if (ymin > ymax) {
    ymin = 0.0;
    ymax = 1.0;
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;

  const auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  const auto py = [&](double yv) {
    double y = log_y ? std::log10(std::max(yv, 1e-300)) : yv;
    return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb);
  };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
  std::ostringstream os;
  os << std::setprecision(8);
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  os << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n";
  os << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
     << "</text>\n";
  os << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
     << "' stroke='black'/>\n";
  os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
     << "' stroke='black'/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    const double fy = ymin + (ymax - ymin) * i / 4.0;
    os << "<text x='" << px(fx) << "' y='" << H - mb + 18
       << "' text-anchor='middle' font-size='11'>" << fx << "</text>\n";
    os << "<text x='" << ml - 8 << "' y='" << H - mb - (H - mt - mb) * i / 4.0 + 4
       << "' text-anchor='end' font-size='11'>" << (log_y ? std::pow(10.0, fy) : fy)
       << "</text>\n";
  }
  os << "<text x='" << (ml + W - mr) / 2 << "' y='" << H - 12
     << "' text-anchor='middle' font-size='13'>" << xlabel << "</text>\n";
  os << "<text x='18' y='" << (mt + H - mb) / 2
     << "' text-anchor='middle' font-size='13' transform='rotate(-90 18 "
     << (mt + H - mb) / 2 << ")'>" << ylabel << "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    os << "<polyline fill='none' stroke='" << colors[si % 8] << "' stroke-width='1.5' points='";
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (log_y && s.y[i] <= 0.0) continue;
      os << px(s.x[i]) << "," << py(s.y[i]) << " ";
    }
    os << "'/>\n";
    os << "<text x='" << W - mr - 6 << "' y='" << mt + 16 + 16 * si
       << "' text-anchor='end' font-size='12' fill='" << colors[si % 8] << "'>" << s.label
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace pdectrl::artifacts
