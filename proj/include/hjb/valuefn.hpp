#pragma once

#include "hjb/lyapchain.hpp"
#include "hjb/system.hpp"

namespace hjb {

struct FeedbackEval {
  double value = 0.0;      // u_p(y)
  Vector gradient_Vp;      // DV_p(y)
  double Vp = 0.0;         // V_p(y)
};

// V_p(y) = 1/2 y'Pi y + sum_{k=3}^p (1/k!) T_k(y,...,y).
double evalVp(const ExpansionCoeffs& coeffs, const Vector& y);

// Gradient g with g.z = sum_{k=2}^p 1/(k-1)! T_k(z, y^{(k-1)}).
Vector gradVp(const ExpansionCoeffs& coeffs, const Vector& y);

// u_p(y) = -(1/alpha) DV_p(y).(N y + B).
double feedbackUp(const ExpansionCoeffs& coeffs, const BilinearSystem& system, const Vector& y);

FeedbackEval evalFeedback(const ExpansionCoeffs& coeffs, const BilinearSystem& system,
                          const Vector& y);

// HJB remainder of V_p from its defining double sum over the q_{p,i}:
//   r_p(y) = 1/(2 alpha) sum_{i=p+1}^{2p} sum_{j=i-p}^{p} q_{p,j}(y) q_{p,i-j}(y).
double residualRp(const ExpansionCoeffs& coeffs, const BilinearSystem& system, const Vector& y);

// Same quantity through the HJB form:
//   -DV_p(y).(Ay) - 1/2 ||y||^2 + 1/(2 alpha) (DV_p(y).(Ny+B))^2.
double hjbResidual(const ExpansionCoeffs& coeffs, const BilinearSystem& system, const Vector& y);

// l(y,u) = 1/2 ||y||^2 + alpha/2 u^2 and l_p = l + r_p(y).
double runningCost(const Vector& y, double u, double alpha);
double runningCostP(const ExpansionCoeffs& coeffs, const BilinearSystem& system, const Vector& y,
                    double u);

}  // namespace hjb
