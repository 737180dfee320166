"""Per-waypoint beamforming and power-allocation optimization.

Uplink: min-max transmission latency over FBS/turbine beamformers, solved by
alternating block updates. Each coupled block maximizes the rate floor by
bisection, with a feasibility oracle running projected-gradient ascent on the
quadratic-transform SINR surrogate; the SINR-threshold constraint enters
through its first-order Taylor linearization. Decoupled blocks are plain
per-user surrogate ascent.

Downlink: joint compute/transmit power split plus beamformers. Beam blocks
mirror the uplink; the power block is solved exactly for fixed beams
(minimum-power control for a rate floor, cube-root-law split of the
remainder, scalar search over the floor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .link import BeamformerSet, PowerAllocation, sinr_from_cross_gains
from .solver import (bisect_max_feasible, project_unit_balls, projected_ascent,
                     softmin_weights)

_FEAS_SLACK = 1e-12
_MAX_EXP2 = 900.0  # exp2 clamp; anything above is infeasible anyway


class InfeasibleError(RuntimeError):
    """Certificate that the SINR threshold cannot be met."""

    def __init__(self, message, turbines, waypoint=None):
        self.turbines = sorted(int(t) for t in turbines)
        self.waypoint = waypoint
        super().__init__(f"{message} (turbines {self.turbines})")


@dataclass
class SolverOptions:
    max_outer_iterations: int = 40
    convergence_tol: float = 1e-5        # relative objective change
    inner_subproblem_tol: float = 1e-10
    inner_max_iters: int = 40
    bisection_rel_tol: float = 1e-8
    bisection_max_steps: int = 60
    step0: float = 1.0
    seed: int = 0


@dataclass
class FpState:
    iteration: int = 0
    alpha: np.ndarray | None = None
    beta: np.ndarray | None = None
    tau: float | None = None
    gamma: float | None = None
    objective_trace: list = field(default_factory=list)
    violation_trace: list = field(default_factory=list)


@dataclass
class UplinkInstance:
    channels: np.ndarray          # (K, N, M)
    tx_power: np.ndarray          # (K,)
    noise: float
    payload_bits: np.ndarray      # (K,)
    bandwidth: float
    sinr_threshold: float


@dataclass
class DownlinkInstance:
    channels: np.ndarray          # (K, M, N)
    noise: float
    dl_payload_bits: np.ndarray
    ul_payload_bits: np.ndarray
    bandwidth: float
    sinr_threshold: float
    power_budget: float
    compute_intensity: float
    processor_coefficient: float


# ---------------------------------------------------------------------------
# Fractional-programming coefficient updates and surrogate
# ---------------------------------------------------------------------------

def _alpha_all(cross, powers, noise):
    amp = np.sqrt(np.asarray(powers)) * np.abs(np.diagonal(cross))
    gains = np.abs(cross) ** 2 * np.asarray(powers)[None, :]
    den = gains.sum(axis=1) - np.diagonal(gains) + noise
    return amp / den


def _surrogate_all(cross, alpha, powers, noise):
    amp = np.sqrt(np.asarray(powers)) * np.abs(np.diagonal(cross))
    gains = np.abs(cross) ** 2 * np.asarray(powers)[None, :]
    den = gains.sum(axis=1) - np.diagonal(gains) + noise
    return 2.0 * alpha * amp - alpha ** 2 * den


def alpha_update(k, channels, beams: BeamformerSet, powers, noise) -> float:
    from .link import uplink_cross_gains
    cross = uplink_cross_gains(channels, beams.fbs_uplink, beams.turbine_uplink)
    return float(_alpha_all(cross, powers, noise)[k])


def surrogate_sinr(k, alpha, channels, beams: BeamformerSet, powers, noise) -> float:
    from .link import uplink_cross_gains
    cross = uplink_cross_gains(channels, beams.fbs_uplink, beams.turbine_uplink)
    alphas = np.zeros(cross.shape[0])
    alphas[k] = alpha
    return float(_surrogate_all(cross, alphas, powers, noise)[k])


def beta_update(k, channels, beams: BeamformerSet, alloc: PowerAllocation,
                noise) -> float:
    from .link import downlink_cross_gains
    cross = downlink_cross_gains(channels, beams.turbine_downlink,
                                 beams.fbs_downlink)
    return float(_alpha_all(cross, alloc.downlink, noise)[k])


def surrogate_sinr_downlink(k, beta, channels, beams: BeamformerSet,
                            alloc: PowerAllocation, noise) -> float:
    from .link import downlink_cross_gains
    cross = downlink_cross_gains(channels, beams.turbine_downlink,
                                 beams.fbs_downlink)
    betas = np.zeros(cross.shape[0])
    betas[k] = beta
    return float(_surrogate_all(cross, betas, alloc.downlink, noise)[k])


@dataclass
class TaylorSinrConstraint:
    """First-order linearization of the convex quadratic |w^H H_k v|^2 at an
    expansion point, paired with the threshold right-hand side.

    The linearized left side is a global under-estimator, so satisfying the
    linearized constraint implies the true one.
    """

    k: int
    effective_channel: np.ndarray   # c = H_k^H w_k
    g_matrix: np.ndarray            # c c^H
    expansion_point: np.ndarray
    anchor_value: float             # |c^H v^(t)|^2
    sinr_threshold: float

    def linearized_lhs(self, v) -> float:
        delta = np.asarray(v) - self.expansion_point
        inner = self.expansion_point.conj() @ self.g_matrix @ delta
        return float(self.anchor_value + 2.0 * inner.real)

    def true_lhs(self, v) -> float:
        return float(np.abs(self.effective_channel.conj() @ np.asarray(v)) ** 2)

    def rhs(self, interference_plus_noise) -> float:
        return float(self.sinr_threshold * interference_plus_noise)


def taylor_sinr_constraint(k, expansion_point, channels, beams: BeamformerSet,
                           sinr_threshold) -> TaylorSinrConstraint:
    w_k = beams.fbs_uplink[k]
    c = channels[k].conj().T @ w_k
    v0 = np.asarray(expansion_point)
    return TaylorSinrConstraint(
        k=int(k),
        effective_channel=c,
        g_matrix=np.outer(c, c.conj()),
        expansion_point=v0.copy(),
        anchor_value=float(np.abs(c.conj() @ v0) ** 2),
        sinr_threshold=float(sinr_threshold),
    )


# ---------------------------------------------------------------------------
# Shared block machinery
# ---------------------------------------------------------------------------

def _svd_matched_init(channels):
    """Matched-filter initialization: principal singular pair per channel."""
    left, right = [], []
    for h in channels:
        u, _, vh = np.linalg.svd(h, full_matrices=False)
        left.append(u[:, 0])
        right.append(vh[0].conj())
    return np.stack(left), np.stack(right)


def _targets(tau, payload, bandwidth, threshold):
    """Per-user SINR targets implied by rate floor tau, never below the
    threshold floor (when one is enforced)."""
    exponent = np.minimum(payload * tau / bandwidth, _MAX_EXP2)
    t = np.exp2(exponent) - 1.0
    if threshold > 0:
        t = np.maximum(t, threshold)
    return t


def _rate_floor(sinr, payload, bandwidth):
    return float(np.min(bandwidth * np.log2(1.0 + sinr) / payload))


def _max_latency(sinr, payload, bandwidth):
    return float(np.max(payload / (bandwidth * np.log2(1.0 + sinr))))


class _CoupledBlock:
    """Max-min rate-floor block over coupled unit-ball beamformers.

    Generic over the uplink V-block and the downlink W-block: the caller
    supplies the effective-channel tensor `comp` with comp[k, l, :] the row
    vector mapping block variable x_l into the (k, l) cross gain.
    """

    def __init__(self, comp, powers, noise, payload, bandwidth, threshold,
                 fp_coeff, opts: SolverOptions):
        self.comp = comp                      # (K, K, dim)
        self.powers = np.asarray(powers)
        self.noise = noise
        self.payload = payload
        self.bandwidth = bandwidth
        self.threshold = threshold
        self.alpha = fp_coeff
        self.opts = opts

    def cross(self, x):
        return np.einsum("kld,ld->kl", self.comp, x)

    def surrogate(self, x):
        return _surrogate_all(self.cross(x), self.alpha, self.powers, self.noise)

    def _restore(self, x0):
        """Softmin ascent of the true min SINR, used to repair threshold
        violations that the anchored surrogate cannot certify away."""
        p = self.powers
        own = np.stack([self.comp[k, k] for k in range(len(p))])

        def parts(x):
            cross = self.cross(x)
            gains = np.abs(cross) ** 2 * p[None, :]
            den = gains.sum(axis=1) - np.diagonal(gains) + self.noise
            return cross, gains, den

        def f(x):
            _, gains, den = parts(x)
            return float((np.diagonal(gains) / den).min() - self.threshold)

        def grad(x):
            cross, gains, den = parts(x)
            sinr = np.diagonal(gains) / den
            weights = softmin_weights(sinr)
            g = (weights * p * np.diagonal(cross) / den)[:, None] * own.conj()
            coeff = (weights * sinr / den)[:, None] * p[None, :] * cross
            np.fill_diagonal(coeff, 0.0)
            g -= np.einsum("kl,kld->ld", coeff, self.comp.conj())
            return 2.0 * g

        res = projected_ascent(
            f, grad, x0, project_unit_balls,
            max_iters=4 * self.opts.inner_max_iters, tol=1e-14,
            step0=self.opts.step0, stop_at=0.01 * self.threshold)
        return res.x

    def solve(self, x0, tau_cur, tau_hi, bis_tol):
        """Bisect the rate floor; each probe runs the surrogate/Taylor
        feasibility oracle from the best point found so far."""
        opts = self.opts
        anchor = np.array(x0, copy=True)
        sqp = np.sqrt(self.powers)

        # Taylor anchor data (fixed per block solve): own effective channels
        # and their responses at the anchor.
        own = np.stack([self.comp[k, k] for k in range(len(self.powers))])
        u0 = np.einsum("kd,kd->k", own, anchor)
        anchor_quad = np.abs(u0) ** 2
        use_taylor = self.threshold > 0

        den0 = None
        if use_taylor:
            g0 = np.abs(self.cross(anchor)) ** 2 * self.powers[None, :]
            den0 = g0.sum(axis=1) - np.diagonal(g0) + self.noise
            taylor_scale = np.maximum(self.threshold * den0, 1e-300)

        state = {"x": anchor, "tau": tau_cur}

        def oracle(tau):
            t = _targets(tau, self.payload, self.bandwidth, self.threshold)
            scale = np.maximum(t, 1e-30)

            def components(x):
                cross = self.cross(x)
                gains = np.abs(cross) ** 2 * self.powers[None, :]
                den = gains.sum(axis=1) - np.diagonal(gains) + self.noise
                amp = sqp * np.abs(np.diagonal(cross))
                surro = 2.0 * self.alpha * amp - self.alpha ** 2 * den
                comps = [(surro - t) / scale]
                if use_taylor:
                    uk = np.einsum("kd,kd->k", own, x)
                    lin = anchor_quad + 2.0 * (u0.conj() * (uk - u0)).real
                    comps.append((self.powers * lin - self.threshold * den)
                                 / taylor_scale)
                return np.concatenate(comps), cross

            def f(x):
                vals, _ = components(x)
                return float(vals.min())

            def grad(x):
                vals, cross = components(x)
                k_count = len(self.powers)
                weights = softmin_weights(vals)
                ws = weights[:k_count] / scale
                g = np.zeros_like(x)
                diag = np.diagonal(cross)
                phase = diag / np.maximum(np.abs(diag), 1e-300)
                # Surrogate signal terms (own variable).
                g += (ws * 2.0 * self.alpha * sqp * phase)[:, None] * own.conj()
                # Interference coefficients, shared by surrogate and Taylor.
                coeff = ws[:, None] * (self.alpha ** 2)[:, None]
                if use_taylor:
                    wt = weights[k_count:] / taylor_scale
                    coeff = coeff + wt[:, None] * self.threshold
                    # Taylor signal terms (linearized own-channel response).
                    g += (wt * 2.0 * self.powers)[:, None] * (own.conj() * u0[:, None])
                coeff = coeff * self.powers[None, :] * cross
                np.fill_diagonal(coeff, 0.0)
                g -= 2.0 * np.einsum("kl,kld->ld", coeff, self.comp.conj())
                return g

            res = projected_ascent(
                f, grad, state["x"], project_unit_balls,
                max_iters=opts.inner_max_iters, tol=opts.inner_subproblem_tol,
                step0=opts.step0, stop_at=_FEAS_SLACK)
            ok = res.objective >= -_FEAS_SLACK
            if ok:
                state["x"] = res.x
            return ok, res.x

        ok, _ = oracle(tau_cur)
        if not ok:
            # Current point misses the threshold floor. Repair it on the true
            # SINR and hand back; the next outer iteration re-anchors the
            # surrogate there so the floor can be raised from a clean start.
            if not use_taylor:
                return anchor, tau_cur
            return self._restore(anchor), tau_cur
        if tau_hi <= tau_cur * (1.0 + bis_tol):
            return state["x"], tau_cur
        tau_best, x_best = bisect_max_feasible(
            tau_cur, tau_hi, oracle, rel_tol=bis_tol,
            max_steps=opts.bisection_max_steps)
        if tau_best > tau_cur:
            return x_best, tau_best
        return state["x"], tau_cur


def _per_user_mmse(signal_vectors, interference_mats, noise, x0):
    """Decoupled block: each user's unit-norm combiner maximizing its own
    SINR has the closed form (R_k + noise I)^{-1} c_k, normalized."""
    out = np.array(x0, copy=True)
    dim = out.shape[1]
    eye = np.eye(dim)
    for k, c1 in enumerate(signal_vectors):
        w = np.linalg.solve(interference_mats[k] + noise * eye, c1)
        norm = np.linalg.norm(w)
        if norm > 0 and np.isfinite(norm):
            out[k] = w / norm
    return out


# ---------------------------------------------------------------------------
# Uplink waypoint solve (P1.1)
# ---------------------------------------------------------------------------

def _rel_violation(sinr, threshold):
    if threshold <= 0:
        return 0.0
    return max(0.0, float((threshold - sinr.min()) / threshold))


def _beam_accept(viol_old, obj_old, viol_new, obj_new):
    """Keep a beam update only if it repairs violation or improves latency."""
    if viol_new < viol_old - 1e-15:
        return True
    return viol_new <= viol_old + 1e-15 and obj_new <= obj_old


def solve_uplink_waypoint(inst: UplinkInstance, opts: SolverOptions | None = None,
                          init=None, freeze_turbine_beams=False,
                          enforce_threshold=True, waypoint=None):
    """Alternating optimization of turbine and FBS uplink beamformers.

    Returns (fbs_beams, turbine_beams, FpState). Raises InfeasibleError with
    a certificate if the SINR threshold cannot be met.
    """
    from .link import uplink_cross_gains

    opts = opts or SolverOptions()
    h = inst.channels
    k_count = h.shape[0]
    p = np.asarray(inst.tx_power, dtype=float)
    sigma_max = np.array([np.linalg.norm(hk, 2) for hk in h])
    snr_bound = p * sigma_max ** 2 / inst.noise

    if enforce_threshold:
        bad = np.flatnonzero(snr_bound < inst.sinr_threshold)
        if bad.size:
            raise InfeasibleError(
                "uplink SINR threshold exceeds the single-user SNR bound",
                bad, waypoint)

    if init is not None:
        fbs, turb = np.array(init[0], copy=True), np.array(init[1], copy=True)
    else:
        fbs, turb = _svd_matched_init(h)

    tau_hi = float(np.min(inst.bandwidth * np.log2(1.0 + snr_bound)
                          / inst.payload_bits))
    threshold = inst.sinr_threshold if enforce_threshold else 0.0

    state = FpState()
    last_rel_change = 1.0
    for it in range(1, opts.max_outer_iterations + 1):
        bis_tol = max(opts.bisection_rel_tol, 0.01 * last_rel_change)

        if not freeze_turbine_beams:
            cross = uplink_cross_gains(h, fbs, turb)
            alpha = _alpha_all(cross, p, inst.noise)
            sinr = sinr_from_cross_gains(cross, p, inst.noise)
            if np.all(sinr > 0):
                tau_cur = _rate_floor(sinr, inst.payload_bits, inst.bandwidth)
                comp = np.einsum("kn,lnm->klm", fbs.conj(), h)  # w_k^H H_l
                block = _CoupledBlock(comp, p, inst.noise, inst.payload_bits,
                                      inst.bandwidth, threshold, alpha, opts)
                obj_old = _max_latency(sinr, inst.payload_bits, inst.bandwidth)
                viol_old = _rel_violation(sinr, threshold)
                cand, _ = block.solve(turb, tau_cur, tau_hi, bis_tol)
                sinr_new = sinr_from_cross_gains(
                    uplink_cross_gains(h, fbs, cand), p, inst.noise)
                obj_new = _max_latency(sinr_new, inst.payload_bits,
                                       inst.bandwidth)
                if _beam_accept(viol_old, obj_old,
                                _rel_violation(sinr_new, threshold), obj_new):
                    turb = cand

        cross = uplink_cross_gains(h, fbs, turb)
        alpha = _alpha_all(cross, p, inst.noise)
        received = np.einsum("lnm,lm->ln", h, turb)  # H_l v_l
        inter = [sum(p[l] * np.outer(received[l], received[l].conj())
                     for l in range(k_count) if l != k)
                 if k_count > 1 else np.zeros((h.shape[1], h.shape[1]), complex)
                 for k in range(k_count)]
        fbs = _per_user_mmse(received, inter, inst.noise, fbs)

        cross = uplink_cross_gains(h, fbs, turb)
        sinr = sinr_from_cross_gains(cross, p, inst.noise)
        objective = _max_latency(sinr, inst.payload_bits, inst.bandwidth)
        violation = max(0.0, float((inst.sinr_threshold - sinr.min())
                                   / inst.sinr_threshold)) if enforce_threshold else 0.0
        state.objective_trace.append(objective)
        state.violation_trace.append(violation)
        state.iteration = it
        state.alpha = alpha
        state.tau = 1.0 / objective
        if len(state.objective_trace) > 1:
            prev = state.objective_trace[-2]
            last_rel_change = abs(prev - objective) / max(abs(prev), 1e-300)
            if last_rel_change < opts.convergence_tol and violation <= 1e-12:
                break

    if enforce_threshold:
        sinr = sinr_from_cross_gains(
            uplink_cross_gains(h, fbs, turb), p, inst.noise)
        bad = np.flatnonzero(sinr < inst.sinr_threshold * (1.0 - 1e-6))
        if bad.size:
            raise InfeasibleError(
                "uplink SINR threshold not met at convergence", bad, waypoint)
    return fbs, turb, state


# ---------------------------------------------------------------------------
# Downlink waypoint solve (P2)
# ---------------------------------------------------------------------------

def _min_power_for_targets(gains, cross_power, noise, targets):
    """Minimum downlink powers meeting per-user SINR targets, or None.

    Solves (diag(g/t) - C) p = noise with C the off-diagonal cross-gain
    matrix; a strictly positive solution certifies feasibility.
    """
    k_count = len(gains)
    a = np.diag(gains / targets) - cross_power
    b = np.full(k_count, noise)
    try:
        pwr = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(pwr)) or np.any(pwr <= 0):
        return None
    return pwr


def _compute_split(remaining, comp_weight):
    """Split the leftover budget over compute tasks; the cube-root delay law
    makes the optimum proportional to weight^(3/4)."""
    share = comp_weight ** 0.75
    return remaining * share / share.sum()


def optimize_power_allocation(cross, inst: DownlinkInstance,
                              alloc: PowerAllocation, opts: SolverOptions,
                              enforce_threshold=True):
    """Exact power block for fixed beams: scalar search over the downlink
    rate floor; each floor value fixes the minimum transmit powers and the
    compute split absorbs the remainder."""
    gains = np.abs(np.diagonal(cross)) ** 2
    cross_power = np.abs(cross) ** 2
    np.fill_diagonal(cross_power, 0.0)
    comp_weight = (inst.compute_intensity * inst.ul_payload_bits
                   * inst.processor_coefficient ** (1.0 / 3.0))
    threshold = inst.sinr_threshold if enforce_threshold else 0.0

    def evaluate(gamma):
        t = _targets(gamma, inst.dl_payload_bits, inst.bandwidth, threshold)
        p_dl = _min_power_for_targets(gains, cross_power, inst.noise, t)
        if p_dl is None:
            return math.inf, None
        used = p_dl.sum()
        if used >= inst.power_budget * (1.0 - 1e-12):
            return math.inf, None
        p_comp = _compute_split(inst.power_budget - used, comp_weight)
        comp_latency = float(np.sum(comp_weight * p_comp ** (-1.0 / 3.0)))
        dl_latency = float(np.max(inst.dl_payload_bits
                                  / (inst.bandwidth * np.log2(1.0 + t))))
        obj = comp_latency + dl_latency
        return obj, PowerAllocation(downlink=p_dl, compute=p_comp)

    sinr = sinr_from_cross_gains(cross, alloc.downlink, inst.noise)
    if np.any(sinr <= 0):
        return alloc, math.inf
    gamma_cur = _rate_floor(sinr, inst.dl_payload_bits, inst.bandwidth)
    cur_obj, cand = evaluate(gamma_cur)
    if cand is None:
        # Current floor infeasible at minimum power (threshold floor binds).
        return alloc, math.inf

    # Expand to bracket the largest feasible floor, then refine the search.
    gamma_max = gamma_cur
    step = max(gamma_cur, 1e-6)
    while evaluate(gamma_max + step)[1] is not None and step < 1e12 * max(gamma_cur, 1.0):
        gamma_max += step
        step *= 2.0
    gamma_max, _ = bisect_max_feasible(
        gamma_max, gamma_max + step,
        lambda g: (evaluate(g)[1] is not None, None),
        rel_tol=1e-9, max_steps=80)

    lo = math.log(max(gamma_max * 1e-8, 1e-300))
    hi = math.log(gamma_max * (1.0 - 1e-9))
    res = minimize_scalar(lambda lg: evaluate(math.exp(lg))[0],
                          bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    best_obj, best_alloc = evaluate(math.exp(res.x))
    # Coarse sweep guards against a non-bracketing scalar search.
    for lg in np.linspace(lo, hi, 48):
        obj, a = evaluate(math.exp(lg))
        if obj < best_obj:
            best_obj, best_alloc = obj, a
    if best_alloc is None:
        return alloc, math.inf
    return best_alloc, best_obj


def _downlink_objective(cross, alloc: PowerAllocation, inst: DownlinkInstance):
    sinr = sinr_from_cross_gains(cross, alloc.downlink, inst.noise)
    if np.any(sinr <= 0):
        return math.inf, sinr
    dl = _max_latency(sinr, inst.dl_payload_bits, inst.bandwidth)
    comp_weight = (inst.compute_intensity * inst.ul_payload_bits
                   * inst.processor_coefficient ** (1.0 / 3.0))
    comp = float(np.sum(comp_weight * np.asarray(alloc.compute) ** (-1.0 / 3.0)))
    return comp + dl, sinr


def solve_downlink_waypoint(inst: DownlinkInstance,
                            opts: SolverOptions | None = None,
                            init=None, freeze_turbine_beams=False,
                            freeze_fbs_beams=False, fixed_allocation=None,
                            init_allocation=None, enforce_threshold=True,
                            waypoint=None):
    """Alternating optimization of downlink beams and the power split.

    Returns (fbs_beams, turbine_beams, PowerAllocation, FpState).
    """
    from .link import downlink_cross_gains

    opts = opts or SolverOptions()
    g = inst.channels
    k_count = g.shape[0]
    sigma_max = np.array([np.linalg.norm(gk, 2) for gk in g])
    snr_bound = inst.power_budget * sigma_max ** 2 / inst.noise

    if enforce_threshold:
        bad = np.flatnonzero(snr_bound < inst.sinr_threshold)
        if bad.size:
            raise InfeasibleError(
                "downlink SINR threshold exceeds the budget-limited SNR bound",
                bad, waypoint)

    if init is not None:
        turb, fbs = np.array(init[0], copy=True), np.array(init[1], copy=True)
    else:
        turb, fbs = _svd_matched_init(g)

    if fixed_allocation is not None:
        alloc = fixed_allocation
    elif init_allocation is not None:
        alloc = init_allocation
    else:
        equal = inst.power_budget / (2.0 * k_count)
        alloc = PowerAllocation(downlink=np.full(k_count, equal),
                                compute=np.full(k_count, equal))

    threshold = inst.sinr_threshold if enforce_threshold else 0.0
    gamma_hi = float(np.min(inst.bandwidth * np.log2(1.0 + snr_bound)
                            / inst.dl_payload_bits))

    state = FpState()
    last_rel_change = 1.0
    for it in range(1, opts.max_outer_iterations + 1):
        bis_tol = max(opts.bisection_rel_tol, 0.01 * last_rel_change)
        p_dl = np.asarray(alloc.downlink, dtype=float)

        if not freeze_turbine_beams:
            signal = np.einsum("kmn,kn->km", g, fbs)  # G_k w_k
            inter = []
            for k in range(k_count):
                gw = g[k] @ fbs.T  # columns G_k w_l
                mat = np.zeros((g.shape[1], g.shape[1]), complex)
                for l in range(k_count):
                    if l != k:
                        mat += p_dl[l] * np.outer(gw[:, l], gw[:, l].conj())
                inter.append(mat)
            turb = _per_user_mmse(signal, inter, inst.noise, turb)

        if not freeze_fbs_beams:
            cross = downlink_cross_gains(g, turb, fbs)
            beta = _alpha_all(cross, p_dl, inst.noise)
            sinr = sinr_from_cross_gains(cross, p_dl, inst.noise)
            if np.all(sinr > 0):
                gamma_cur = _rate_floor(sinr, inst.dl_payload_bits, inst.bandwidth)
                effective = np.einsum("km,kmn->kn", turb.conj(), g)  # v_k^H G_k
                comp = np.repeat(effective.conj()[:, None, :], k_count, axis=1)
                block = _CoupledBlock(comp, p_dl, inst.noise,
                                      inst.dl_payload_bits, inst.bandwidth,
                                      threshold, beta, opts)
                obj_old, _ = _downlink_objective(cross, alloc, inst)
                viol_old = _rel_violation(sinr, threshold)
                cand, _ = block.solve(fbs, gamma_cur, gamma_hi, bis_tol)
                cross_new = downlink_cross_gains(g, turb, cand)
                obj_new, sinr_new = _downlink_objective(cross_new, alloc, inst)
                if _beam_accept(viol_old, obj_old,
                                _rel_violation(sinr_new, threshold), obj_new):
                    fbs = cand

        cross = downlink_cross_gains(g, turb, fbs)
        if fixed_allocation is None:
            cur_obj, _ = _downlink_objective(cross, alloc, inst)
            new_alloc, new_obj = optimize_power_allocation(
                cross, inst, alloc, opts, enforce_threshold)
            if new_obj < cur_obj:
                alloc = new_alloc

        objective, sinr = _downlink_objective(cross, alloc, inst)
        violation = max(0.0, float((inst.sinr_threshold - sinr.min())
                                   / inst.sinr_threshold)) if enforce_threshold else 0.0
        state.objective_trace.append(objective)
        state.violation_trace.append(violation)
        state.iteration = it
        state.beta = _alpha_all(cross, np.asarray(alloc.downlink), inst.noise)
        state.gamma = _rate_floor(sinr, inst.dl_payload_bits, inst.bandwidth) \
            if np.all(sinr > 0) else None
        if len(state.objective_trace) > 1:
            prev = state.objective_trace[-2]
            last_rel_change = abs(prev - objective) / max(abs(prev), 1e-300)
            if last_rel_change < opts.convergence_tol and violation <= 1e-12:
                break

    if enforce_threshold:
        cross = downlink_cross_gains(g, turb, fbs)
        sinr = sinr_from_cross_gains(cross, np.asarray(alloc.downlink), inst.noise)
        bad = np.flatnonzero(sinr < inst.sinr_threshold * (1.0 - 1e-6))
        if bad.size:
            raise InfeasibleError(
                "downlink SINR threshold not met at convergence", bad, waypoint)
    return fbs, turb, alloc, state


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

def baseline_equal_power(power_budget: float, k_count: int) -> PowerAllocation:
    """Even split of the budget over downlink-transmit and compute tasks."""
    each = power_budget / (2.0 * k_count)
    return PowerAllocation(downlink=np.full(k_count, each),
                           compute=np.full(k_count, each))


def _sphere_points(rng, count, dim):
    z = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def baseline_random_beams(k_count: int, n_fbs: int, m_turbine: int,
                          seed: int) -> BeamformerSet:
    """All four beam sets drawn uniformly on the complex unit sphere."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    return BeamformerSet(
        fbs_uplink=_sphere_points(rng, k_count, n_fbs),
        turbine_uplink=_sphere_points(rng, k_count, m_turbine),
        fbs_downlink=_sphere_points(rng, k_count, n_fbs),
        turbine_downlink=_sphere_points(rng, k_count, m_turbine),
    )


def baseline_omni_turbine_beams(k_count: int, m_turbine: int) -> np.ndarray:
    """Uniform unit-norm turbine-side vectors (no turbine-side directivity)."""
    return np.full((k_count, m_turbine), 1.0 / math.sqrt(m_turbine),
                   dtype=complex)
