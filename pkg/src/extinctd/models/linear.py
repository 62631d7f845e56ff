"""Linear SDE benchmark dx = A x dt + (Sigma x) dW with a scalar Brownian
driver.  The origin is the extinction set; the polar blow-up turns it into
the unit sphere, where the direction process carries the exponent."""

from __future__ import annotations

import numpy as np

from ..errors import NonSquare
from ..process_core import ModelSpec, StateVector
from .base import ModelBundle, QuadrupleMap, ball_sample, power_suite


def _norm(x):
    return np.sqrt(np.sum(np.asarray(x, dtype=float) ** 2, axis=-1))


def make_linear_sde(A, Sigma=None) -> ModelBundle:
    """Linear model with V = -log|x| and its sphere (polar) companions.

    With Sigma = 0 the decay exponent is minus the largest real part of the
    eigenvalues of A; for scalar models it is -a + sigma^2/2.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NonSquare("A must be square")
    n = A.shape[0]
    if Sigma is None:
        Sigma = np.zeros((n, n))
    Sigma = np.asarray(Sigma, dtype=float)
    if Sigma.shape != A.shape:
        raise NonSquare("Sigma must match the shape of A")
    noisy = bool(np.any(Sigma != 0.0))

    def drift(x, s=None):
        return A @ x

    def diffusion(x, s=None):
        return (Sigma @ x)[:, None]

    model = ModelSpec(
        family="sde", dim=n, noise_dim=1 if noisy else 0,
        drift=drift, diffusion=diffusion if noisy else None,
        extinction_distance=lambda x, s=None: _norm(x),
        name="linear",
    )

    def V(x, s=None):
        return -0.5 * np.log(np.sum(np.asarray(x, dtype=float) ** 2, axis=-1))

    def _eta(v):
        return np.sum(v * (v @ Sigma.T), axis=-1)

    def H(x, s=None):
        x = np.asarray(x, dtype=float)
        v = x / _norm(x)[..., None]
        sv = v @ Sigma.T
        eta = np.sum(v * sv, axis=-1)
        return (-np.sum(v * (v @ A.T), axis=-1)
                - 0.5 * np.sum(sv * sv, axis=-1) + eta ** 2)

    def gammaV(x, s=None):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        return (np.sum(x * (x @ Sigma.T), axis=-1)) ** 2 / r2 ** 2

    # master function (1 + |x|^2)^(1/2) for the tightness suite
    def ubar(x, s=None):
        return np.sqrt(1.0 + np.sum(np.asarray(x, dtype=float) ** 2, axis=-1))

    def lu_over_u(x, s=None):
        x = np.asarray(x, dtype=float)
        u = 1.0 + np.sum(x * x, axis=-1)
        w = x @ Sigma.T
        quad = np.sum(x * (x @ A.T), axis=-1)
        return (quad + 0.5 * (np.sum(w * w, axis=-1)
                              - np.sum(x * w, axis=-1) ** 2 / u)) / u

    def gu_over_u2(x, s=None):
        x = np.asarray(x, dtype=float)
        u = 1.0 + np.sum(x * x, axis=-1)
        return np.sum(x * (x @ Sigma.T), axis=-1) ** 2 / u ** 2

    alpha = None
    if not noisy:
        alpha = float(-np.max(np.linalg.eigvals(A).real))
    elif n == 1:
        alpha = float(-A[0, 0] + 0.5 * Sigma[0, 0] ** 2)
    suite = power_suite(model, V, H, gammaV, ubar, lu_over_u, gu_over_u2,
                        ball_sample(n, 6.0, 48), alpha_candidate=alpha)

    # polar blow-up: state (v, r) with x = r v
    def _split(u):
        return u[:n], u[n]

    def bl_drift(u, s=None):
        v, r = _split(u)
        av = A @ v
        sv = Sigma @ v
        g = float(v @ av) + 0.5 * (float(sv @ sv) - float(v @ sv) ** 2)
        eta = float(v @ sv)
        dv = av - g * v + eta * eta * v - eta * sv
        return np.concatenate([dv, [r * g]])

    def bl_diffusion(u, s=None):
        v, r = _split(u)
        sv = Sigma @ v
        eta = float(v @ sv)
        return np.concatenate([sv - eta * v, [r * eta]])[:, None]

    def bl_project(u, s=None):
        v, r = _split(u)
        v = v / np.linalg.norm(v)
        return np.concatenate([v, [max(r, 0.0)]])

    blowup = ModelSpec(
        family="sde", dim=n + 1, noise_dim=1 if noisy else 0,
        drift=bl_drift, diffusion=bl_diffusion if noisy else None,
        domain_projection=bl_project,
        extinction_distance=lambda u, s=None: np.abs(np.asarray(u)[..., n]),
        name="linear-polar",
    )

    def sp_drift(v, s=None):
        av = A @ v
        sv = Sigma @ v
        g = float(v @ av) + 0.5 * (float(sv @ sv) - float(v @ sv) ** 2)
        eta = float(v @ sv)
        return av - g * v + eta * eta * v - eta * sv

    def sp_diffusion(v, s=None):
        sv = Sigma @ v
        return (sv - float(v @ sv) * v)[:, None]

    boundary = ModelSpec(
        family="sde", dim=n, noise_dim=1 if noisy else 0,
        drift=sp_drift, diffusion=sp_diffusion if noisy else None,
        domain_projection=lambda v, s=None: v / np.linalg.norm(v),
        extinction_distance=lambda v, s=None: np.zeros(np.shape(v)[:-1]),
        name="linear-sphere",
    )

    def boundary_H(v, s=None):
        v = np.asarray(v, dtype=float)
        sv = v @ Sigma.T
        eta = np.sum(v * sv, axis=-1)
        return (-np.sum(v * (v @ A.T), axis=-1)
                - 0.5 * np.sum(sv * sv, axis=-1) + eta ** 2)

    quad = QuadrupleMap(
        forward=lambda u: np.asarray(u)[..., :n] * np.asarray(u)[..., n:],
        inverse=lambda x: np.concatenate(
            [np.asarray(x) / _norm(x)[..., None], _norm(x)[..., None]], axis=-1),
        boundary_preimage="unit sphere x {r = 0}",
    )

    ic = np.full(n, 1.0 / np.sqrt(n))
    return ModelBundle(name="linear", model=model, suite=suite,
                       boundary=boundary, boundary_H=boundary_H,
                       blowup=blowup, quad_map=quad,
                       default_ic=StateVector(ic),
                       boundary_ic=StateVector(ic),
                       params={"A": A.tolist(), "Sigma": Sigma.tolist()})
