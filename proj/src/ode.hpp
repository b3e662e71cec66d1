#pragma once

// Adaptive embedded Runge-Kutta driver (Fehlberg 7(8) stepper from
// Boost.Odeint) with caller-supplied error scales and an accept hook. The hook
// sees both ends of every accepted step, may rescale the new state in place,
// and returns the state the next step starts from.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>

#include "chitbl/error.hpp"

namespace chitbl::detail {

using xreal = long double;

template <std::size_t K>
using OdeState = std::array<xreal, K>;

struct StepControl {
  xreal rtol = 1e-17L;
  xreal h_init = 1e-3L;
  xreal h_max = 1.0L;
  std::size_t max_steps = 2'000'000;
};

struct IntegrationStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  xreal err_sum = 0.0L;  // sum of per-step normalized error estimates
  xreal h_next = 0.0L;   // proposed size of the step after the last one
};

template <std::size_t K>
struct StepEnds {
  xreal ta, tb;
  const OdeState<K>& xa;
  const OdeState<K>& dxa;
  const OdeState<K>& xb;
  const OdeState<K>& dxb;
};

/// Integrates x' = rhs(x, t) from t0 to t1 (either direction).
///   rhs(const OdeState<K>& x, OdeState<K>& dxdt, xreal t)
///   scale(const OdeState<K>& x, const OdeState<K>& dxdt, xreal t, xreal h)
///       -> OdeState<K> of positive error scales (already multiplied by rtol)
///   on_accept(const StepEnds<K>&, OdeState<K>& x_next) -> void
template <std::size_t K, class Rhs, class Scale, class OnAccept>
IntegrationStats integrate(Rhs&& rhs, OdeState<K>& x, xreal t0, xreal t1,
                           const StepControl& ctl, Scale&& scale, OnAccept&& on_accept) {
  using State = OdeState<K>;
  boost::numeric::odeint::runge_kutta_fehlberg78<State, xreal, State, xreal> stepper;
  auto sys = [&rhs](const State& s, State& d, xreal t) { rhs(s, d, t); };

  IntegrationStats st;
  const xreal dir = (t1 >= t0) ? 1.0L : -1.0L;
  xreal t = t0;
  xreal h = dir * std::min(std::fabs(ctl.h_init), std::fabs(t1 - t0));
  State dx{};
  rhs(x, dx, t);
  State xn{};
  State dxn{};
  State xerr{};

  while (dir * (t1 - t) > 0.0L) {
    if (st.accepted + st.rejected >= ctl.max_steps) {
      fail(ErrorCode::numerical_failure, "ODE integration exceeded the step budget");
    }
    bool last = false;
    if (dir * (t + h - t1) >= 0.0L) {
      h = t1 - t;
      last = true;
    }
    stepper.do_step(sys, x, dx, t, xn, h, xerr);
    const State sc = scale(x, dx, t, h);
    xreal err = 0.0L;
    bool finite = true;
    for (std::size_t i = 0; i < K; ++i) {
      if (!std::isfinite(xn[i]) || !std::isfinite(xerr[i])) finite = false;
      err = std::max(err, std::fabs(xerr[i]) / sc[i]);
    }
    if (!finite) err = 1e6L;
    if (err <= 1.0L) {
      const xreal tn = last ? t1 : t + h;
      rhs(xn, dxn, tn);
      on_accept(StepEnds<K>{t, tn, x, dx, xn, dxn}, xn);
      x = xn;
      rhs(x, dx, tn);
      t = tn;
      ++st.accepted;
      st.err_sum += err;
    } else {
      ++st.rejected;
      if (std::fabs(h) < 1e-30L * std::max(1.0L, std::fabs(t))) {
        fail(ErrorCode::numerical_failure, "ODE step size underflow");
      }
    }
    const xreal fac = (err == 0.0L) ? 4.0L
                                    : std::clamp(0.9L * std::pow(err, -1.0L / 8.0L), 0.2L, 4.0L);
    h *= (err <= 1.0L) ? fac : std::min(fac, 0.5L);
    if (std::fabs(h) > ctl.h_max) h = dir * ctl.h_max;
    if (!last || err > 1.0L) st.h_next = h;
  }
  if (st.h_next == 0.0L) st.h_next = h;
  return st;
}

}  // namespace chitbl::detail
