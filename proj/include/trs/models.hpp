#pragma once

// Learnable vector fields. An ODEN is an MLP x -> dx/dt. A HODEN learns a
// separable Hamiltonian H(q, p) = K(p) + V(q) as two scalar MLPs and follows
// Hamilton's equations dq/dt = dK/dp, dp/dt = -dV/dq. Time-augmented variants
// append t to every network input.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "trs/integrators.hpp"
#include "trs/mlp.hpp"

namespace trs {

enum class ModelKind { oden, hoden };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct OdenModel {
  MlpSpec spec;
  ModelParams params;
  bool time_augmented = false;

  std::size_t state_dim() const { return spec.output_dim; }
  void validate() const;
  bool operator==(const OdenModel&) const = default;
};

struct HodenModel {
  MlpSpec kinetic_spec;    // p (, t) -> K
  MlpSpec potential_spec;  // q (, t) -> V
  ModelParams kinetic;
  ModelParams potential;
  bool time_augmented = false;

  std::size_t half_dim() const {
    return kinetic_spec.input_dim - (time_augmented ? 1 : 0);
  }
  std::size_t state_dim() const { return 2 * half_dim(); }
  void validate() const;
  bool operator==(const HodenModel&) const = default;
};

using Model = std::variant<OdenModel, HodenModel>;

struct ModelSpec {
  ModelKind kind = ModelKind::oden;
  std::size_t state_dim = 2;
  std::vector<std::size_t> hidden = {1000};
  bool time_augmented = false;

  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

// HODEN gives each of K and V the full hidden sizes.
Model make_model(const ModelSpec& spec, std::uint64_t seed);
ModelSpec spec_of(const Model& model);
ModelKind kind_of(const Model& model);
std::size_t state_dim(const Model& model);
bool time_augmented(const Model& model);
void validate_model(const Model& model);

// All parameter tensors in one list (HODEN: kinetic first, then potential).
ModelParams flat_params(const Model& model);
void set_flat_params(Model& model, ModelParams params);

// Differentiable fields. The returned closures reference `tape` and the bound
// vars; both must outlive the field.
TapeField oden_tape_field(const OdenModel& model, Tape& tape, const BoundParams& params);
TapeField hoden_tape_field(const HodenModel& model, Tape& tape,
                           const BoundParams& kinetic, const BoundParams& potential);

struct BoundModel {
  TapeField field;
  BoundParams params;  // flat order, see flat_params
};

// trainable = true binds parameters as variables.
BoundModel bind_model(const Model& model, Tape& tape, bool trainable);

// Numeric fields for rollouts and metrics; each owns a copy of the model.
VectorField oden_field(const OdenModel& model);
VectorField hoden_field(const HodenModel& model);
VectorField model_field(const Model& model);

// K(p, t) + V(q, t). With `calibrate` the ground level K(0, t) + V(0, t) is
// subtracted so that H(0, 0) = 0.
double hoden_energy(const HodenModel& model, const State& state, bool calibrate = false);

}  // namespace trs
