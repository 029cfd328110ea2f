"""Assumption constants, bound formulas, and their empirical counterparts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..envs import sample_batch
from ..estimators import (DiagnosticBounds, estimator_variance, g_norm_bound, iw_variance_diag,
                          per_trajectory_grads, reinforce_variance_bound, smoothness_bound)
from ..policy import gaussian_assumption_constants
from ..rng import DIAG, Streams


@dataclass
class DiagReport:
    bounds: DiagnosticBounds
    trace_cov_reinforce: float
    trace_cov_gpomdp: float
    max_g_sq_reinforce: float
    max_g_sq_gpomdp: float
    perturb: float
    samples: int
    closed_form_note: str | None = None

    def lines(self) -> list[str]:
        def f(v):
            return "n/a" if v is None else f"{v:.6g}"

        b = self.bounds
        out = [f"samples                     {self.samples}"]
        if self.closed_form_note:
            out.append(f"closed forms                unavailable: {self.closed_form_note}")
        out += [
            f"G (score bound)             {f(b.G)}",
            f"F (score Hessian bound)     {f(b.F)}",
            f"L_J (smoothness bound)      {f(b.L_J)}",
            f"Gamma (||g||^2 bound)       {f(b.Gamma)}",
            f"V (REINFORCE var bound)     {f(b.V_bound)}",
            f"trace cov REINFORCE         {f(self.trace_cov_reinforce)}",
            f"trace cov G(PO)MDP          {f(self.trace_cov_gpomdp)}",
            f"max ||g||^2 REINFORCE       {f(self.max_g_sq_reinforce)}",
            f"max ||g||^2 G(PO)MDP        {f(self.max_g_sq_gpomdp)}",
            f"IW variance (perturb {self.perturb:g})   {f(b.W_hat)}",
        ]
        return out


def perturbed(params, scale: float, rng: np.random.Generator) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    return params + scale * rng.standard_normal(params.shape)


def diag_report(env, policy, params, samples: int, rng: Streams, perturb: float = 0.1) -> DiagReport:
    """Evaluate the bound formulas and compare them with sampled quantities.

    Closed-form constants need a linear-mean, fixed-sigma policy with a
    declared feature bound; otherwise only the empirical rows are filled.
    The perturbed copy for the weight variance is ``params + perturb * z``.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    params = np.asarray(params, dtype=float)
    trajs = sample_batch(env, policy, params, samples, rng.child(DIAG, 0))
    g_r = per_trajectory_grads(trajs, policy, params, env.discount, "reinforce")
    g_g = per_trajectory_grads(trajs, policy, params, env.discount, "gpomdp")
    other = perturbed(params, perturb, rng.child(DIAG, 1).generator())
    w_hat = iw_variance_diag(trajs, policy, params, other)

    G = F = L = Gamma = V = None
    note = None
    try:
        G, F = gaussian_assumption_constants(policy, env)
    except ValueError as exc:
        note = str(exc)
    if G is not None:
        R, H, gamma = env.reward_bound, env.horizon, env.discount
        L = smoothness_bound(G, F, R, H, gamma)
        Gamma = g_norm_bound(G, R, H, gamma, policy.dim)
        sigma = float(np.min(policy.sigma0))
        V = reinforce_variance_bound(R, float(policy.mean_fn.feature_bound), H, gamma, sigma)
    bounds = DiagnosticBounds(G, F, V, L, Gamma, w_hat)
    return DiagReport(bounds, estimator_variance(g_r), estimator_variance(g_g),
                      float(np.max(np.sum(g_r ** 2, axis=1))), float(np.max(np.sum(g_g ** 2, axis=1))),
                      perturb, samples, note)
