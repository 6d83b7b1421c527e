// SPDX-License-Identifier: Apache-2.0

#include "psdebnn/json_io.hpp"

namespace psdebnn {

void to_json(nlohmann::json& j, const WeightPartition& p) {
  j = nlohmann::json{{"s", p.s}, {"d", p.d}};
}

void from_json(const nlohmann::json& j, WeightPartition& p) {
  j.at("s").get_to(p.s);
  j.at("d").get_to(p.d);
}

void to_json(nlohmann::json& j, const MlpSpec& s) {
  j = nlohmann::json{{"widths", s.widths}, {"time_input", s.time_input}};
}

void from_json(const nlohmann::json& j, MlpSpec& s) {
  j.at("widths").get_to(s.widths);
  j.at("time_input").get_to(s.time_input);
}

void to_json(nlohmann::json& j, const RegimeSchedule& s) {
  j = nlohmann::json{{"t1", s.t1},
                     {"t2", s.t2},
                     {"jump_mode", to_string(s.jump_mode)},
                     {"num_steps", s.num_steps},
                     {"scheme", to_string(s.scheme)}};
  if (s.horizontal) j["horizontal"] = *s.horizontal;
}

void from_json(const nlohmann::json& j, RegimeSchedule& s) {
  j.at("t1").get_to(s.t1);
  j.at("t2").get_to(s.t2);
  s.jump_mode = jump_mode_from_string(j.at("jump_mode").get<std::string>());
  j.at("num_steps").get_to(s.num_steps);
  s.scheme = det_scheme_from_string(j.at("scheme").get<std::string>());
  if (j.contains("horizontal"))
    s.horizontal = j.at("horizontal").get<WeightPartition>();
  else
    s.horizontal.reset();
}

void to_json(nlohmann::json& j, const ModelSpec& s) {
  j = nlohmann::json{{"fh", s.fh},
                     {"fq_hidden", s.fq_hidden},
                     {"num_classes", s.num_classes},
                     {"input_dim", s.input_dim},
                     {"augment_dim", s.augment_dim},
                     {"ou_lambda", s.ou_lambda},
                     {"prior_residual", s.prior_residual},
                     {"horizontal_m1", s.horizontal_m1}};
}

void from_json(const nlohmann::json& j, ModelSpec& s) {
  j.at("fh").get_to(s.fh);
  j.at("fq_hidden").get_to(s.fq_hidden);
  j.at("num_classes").get_to(s.num_classes);
  j.at("input_dim").get_to(s.input_dim);
  j.at("augment_dim").get_to(s.augment_dim);
  j.at("ou_lambda").get_to(s.ou_lambda);
  j.at("prior_residual").get_to(s.prior_residual);
  j.at("horizontal_m1").get_to(s.horizontal_m1);
}

}  // namespace psdebnn
