#pragma once

#include <optional>

#include "offswitch/payoff.hpp"

namespace offswitch {

enum class ReceiverAction { IMM, DEF, DoN };

inline std::string action_name(ReceiverAction a) {
  switch (a) {
    case ReceiverAction::IMM: return "IMM";
    case ReceiverAction::DEF: return "DEF";
    case ReceiverAction::DoN: return "DoN";
  }
  return "?";
}

inline ReceiverAction parse_action(std::string_view s) {
  if (s == "IMM") return ReceiverAction::IMM;
  if (s == "DEF") return ReceiverAction::DEF;
  if (s == "DoN") return ReceiverAction::DoN;
  throw InvalidArgument("unknown action '" + std::string(s) + "'");
}

enum class DominanceCriterion { PessimisticA, OptimisticB };

namespace detail {

inline ReceiverAction decide_with(double def, const ExpectedPayoffs& p) {
  if (def - p.beta >= std::max(p.imm_value, p.don_value)) return ReceiverAction::DEF;
  return p.imm_value > p.don_value ? ReceiverAction::IMM : ReceiverAction::DoN;
}

// With a direct bonus the comparison is bonus >= beta; a negative bonus that
// underflowed to -0 still loses at beta = 0.
inline ReceiverAction decide_with_bonus(double bonus, const ExpectedPayoffs& p) {
  if (p.beta == 0.0 ? !std::signbit(bonus) : bonus >= p.beta) return ReceiverAction::DEF;
  return p.imm_value > p.don_value ? ReceiverAction::IMM : ReceiverAction::DoN;
}

}  // namespace detail

/// DEF iff def - beta >= max(imm, don); otherwise the better of IMM and DoN,
/// with DoN on a tie.
inline ReceiverAction decide_scalar(const ExpectedPayoffs& p) {
  if (p.bonus && !p.set_valued()) return detail::decide_with_bonus(*p.bonus, p);
  return detail::decide_with(p.def_scalar(), p);
}

/// Criterion A compares the smaller DEF value, criterion B the larger.
inline ReceiverAction decide_threshold(const ExpectedPayoffs& p, DominanceCriterion crit) {
  const DefSet& s = p.def_set();
  return detail::decide_with(crit == DominanceCriterion::PessimisticA ? s.low() : s.high(), p);
}

/// Scalar or set-valued payoffs, whichever `p` holds.
inline ReceiverAction decide(const ExpectedPayoffs& p, DominanceCriterion crit) {
  return p.set_valued() ? decide_threshold(p, crit) : decide_scalar(p);
}

namespace detail {

inline bool weakly_dominates(const std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k] < b[k]) return false;
  return true;
}

}  // namespace detail

/// Action whose payoff vector weakly dominates both others; DEF first, then
/// DoN, then IMM. Empty when no action dominates.
inline std::optional<ReceiverAction> decide_vector(const VectorExpectedPayoffs& v) {
  const std::size_t d = v.def_vector.size();
  if (d == 0 || v.imm_vector.size() != d || v.don_vector.size() != d)
    throw InvalidArgument("decide_vector: dimension mismatch");
  using detail::weakly_dominates;
  if (weakly_dominates(v.def_vector, v.imm_vector) && weakly_dominates(v.def_vector, v.don_vector))
    return ReceiverAction::DEF;
  if (weakly_dominates(v.don_vector, v.imm_vector) && weakly_dominates(v.don_vector, v.def_vector))
    return ReceiverAction::DoN;
  if (weakly_dominates(v.imm_vector, v.don_vector) && weakly_dominates(v.imm_vector, v.def_vector))
    return ReceiverAction::IMM;
  return std::nullopt;
}

inline constexpr double kRationalSigma = 1e-9;
inline constexpr double kUncertainCovariance = 1e-12;

struct Regime {
  bool sender_rational = false;
  bool receiver_uncertain = false;

  friend bool operator==(const Regime&, const Regime&) = default;
};

inline Regime classify_regime(const BivariatePosterior& bp, const RationalityModel& model) {
  return {model_sigma(model) < kRationalSigma,
          bp.k_xx > kUncertainCovariance || bp.k_oo > kUncertainCovariance ||
              std::abs(bp.k_xo) > kUncertainCovariance};
}

}  // namespace offswitch
