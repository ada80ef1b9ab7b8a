#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdectrl/certify.hpp"
#include "pdectrl/nn_policy.hpp"

namespace pdectrl::artifacts {

using json = nlohmann::json;

std::string fnv1a_hex(const std::string& data);

// Hash of the canonical serialization with volatile fields (wall clock,
// timing measurements) removed, so reruns of the same config hash equal.
json strip_volatile(json j);
std::string artifact_hash(const json& j);

void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j);
json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);

json policy_to_json(const nn::Policy& p);
nn::Policy policy_from_json(const json& j);

json certificate_to_json(const certify::CertificateIterate& c);
certify::CertificateIterate certificate_from_json(const json& j);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

std::string svg_line_plot(const std::vector<Series>& series, const std::string& title,
                          const std::string& xlabel, const std::string& ylabel,
                          bool log_y = false);

}  // namespace pdectrl::artifacts
