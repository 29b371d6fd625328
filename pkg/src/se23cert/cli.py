"""Command-line workflow: certify, simulate, verify, export.

Configuration and certificates travel as JSON, time series and set hulls as
CSV with a header row and shortest round-trip float formatting, so a plotting
front end in any language can consume them without touching this package.

Exit codes: 0 success, 2 bad configuration, 3 infeasible certification,
4 containment violation.
"""

import argparse
import csv
import dataclasses
import json
import sys
import time as _time
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from .se23 import left_jacobian
from .sim import (
    ConstantInputReference,
    TrajectoryReference,
    containment_report,
    monte_carlo,
)
from .synthesis import (
    CertBundle,
    Ellipsoid,
    GroupSetSummary,
    InfeasibleError,
    VehicleParams,
    certify_cascade,
)
from .trajectory import min_snap, reference_envelope

BUNDLE_FORMAT = "se23cert-bundle-v1"

HISTORY_COLUMNS = (
    "run", "time",
    "zp_x", "zp_y", "zp_z",
    "zv_x", "zv_y", "zv_z",
    "zr_x", "zr_y", "zr_z",
    "we_x", "we_y", "we_z",
    "lyap_zeta", "lyap_omega",
)

SET_COLUMNS = ("block", "pair", "idx", "u", "v")

_BLOCKS = (("position", (0, 1, 2)), ("velocity", (3, 4, 5)), ("rotation", (6, 7, 8)))
_PAIRS = (("xy", 0, 1), ("xz", 0, 2), ("yz", 1, 2))


class ConfigError(ValueError):
    """Configuration rejected; the message names the offending key."""


# ---------------------------------------------------------------- config ---

def _expect(mapping, key, path, kind=None):
    if key not in mapping:
        raise ConfigError(f"{path}.{key} is required")
    value = mapping[key]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"{path}.{key} has the wrong type")
    return value


def _no_strays(mapping, allowed, path):
    strays = sorted(set(mapping) - set(allowed))
    if strays:
        raise ConfigError(f"{path}: unknown keys {strays}")


def _positive(value, path):
    if not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError(f"{path} must be positive")
    return float(value)


def _nonnegative(value, path):
    if not isinstance(value, (int, float)) or value < 0:
        raise ConfigError(f"{path} must be nonnegative")
    return float(value)


def _vector3(value, path):
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise ConfigError(f"{path} must be a list of 3 numbers")
    return arr


def _weight_matrix(value, n, path):
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return _positive(value, path) * np.eye(n)
    arr = np.asarray(value, dtype=float)
    if arr.shape == (n,):
        if np.any(arr <= 0):
            raise ConfigError(f"{path} diagonal entries must be positive")
        return np.diag(arr)
    if arr.shape == (n, n):
        return arr
    raise ConfigError(f"{path} must be a scalar, a length-{n} diagonal, or {n}x{n}")


def _inertia_matrix(value, path):
    arr = np.asarray(value, dtype=float)
    if arr.shape == (3,):
        arr = np.diag(arr)
    if arr.shape != (3, 3):
        raise ConfigError(f"{path} must be a length-3 diagonal or a 3x3 matrix")
    return arr


@dataclasses.dataclass(frozen=True)
class Config:
    """Validated run configuration; envelope overrides win over trajectory."""

    params: VehicleParams
    envelope_accel: np.ndarray
    envelope_rate: np.ndarray
    waypoints: np.ndarray | None
    durations: np.ndarray | None
    d_accel_cases: tuple
    d_alpha: float
    d_rate_direct: float
    Q_omega: np.ndarray | None
    R_omega: np.ndarray | None
    Q_zeta: np.ndarray | None
    R_zeta: np.ndarray | None
    dt: float
    duration: float
    n_runs: int
    seed: int
    log_stride: int
    rate_feedforward: bool
    out_dir: Path

    def reference(self):
        if self.waypoints is not None:
            return TrajectoryReference(min_snap(self.waypoints, self.durations))
        return ConstantInputReference(self.envelope_accel, self.envelope_rate)

    def case_labels(self):
        if len(self.d_accel_cases) == 2:
            return ("small", "large")
        return tuple(f"case{i}" for i in range(len(self.d_accel_cases)))


def parse_config(raw):
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    _no_strays(raw, ("vehicle", "envelope", "trajectory", "weights",
                     "disturbances", "sim", "out_dir"), "config")

    vehicle = _expect(raw, "vehicle", "config", dict)
    _no_strays(vehicle, ("mass", "inertia"), "config.vehicle")
    try:
        params = VehicleParams(
            mass=_positive(_expect(vehicle, "mass", "config.vehicle"), "config.vehicle.mass"),
            inertia=_inertia_matrix(_expect(vehicle, "inertia", "config.vehicle"),
                                    "config.vehicle.inertia"),
        )
    except ValueError as exc:
        raise ConfigError(f"config.vehicle: {exc}") from None

    waypoints = durations = None
    margin = 0.05
    if "trajectory" in raw:
        traj = raw["trajectory"]
        _no_strays(traj, ("waypoints", "durations", "envelope_margin"), "config.trajectory")
        waypoints = np.asarray(_expect(traj, "waypoints", "config.trajectory", list), dtype=float)
        durations = np.asarray(_expect(traj, "durations", "config.trajectory", list), dtype=float)
        if waypoints.ndim != 2 or waypoints.shape[1] not in (3, 4):
            raise ConfigError("config.trajectory.waypoints must be rows of 3 or 4 numbers")
        if durations.ndim != 1 or len(durations) != len(waypoints) - 1:
            raise ConfigError("config.trajectory.durations must have one entry per segment")
        if np.any(durations <= 0):
            raise ConfigError("config.trajectory.durations must be positive")
        if "envelope_margin" in traj:
            margin = _nonnegative(traj["envelope_margin"], "config.trajectory.envelope_margin")

    if "envelope" in raw:
        env = raw["envelope"]
        _no_strays(env, ("accel", "rate"), "config.envelope")
        envelope_accel = _vector3(_expect(env, "accel", "config.envelope"), "config.envelope.accel")
        envelope_rate = _vector3(_expect(env, "rate", "config.envelope"), "config.envelope.rate")
        if np.any(envelope_accel < 0) or np.any(envelope_rate < 0):
            raise ConfigError("config.envelope entries must be nonnegative")
    elif waypoints is not None:
        envelope_accel, envelope_rate = reference_envelope(
            min_snap(waypoints, durations), margin=margin
        )
    else:
        raise ConfigError("config needs either envelope overrides or a trajectory")

    weights = raw.get("weights", {})
    _no_strays(weights, ("Q_omega", "R_omega", "Q_zeta", "R_zeta"), "config.weights")
    Q_omega = _weight_matrix(weights.get("Q_omega"), 3, "config.weights.Q_omega")
    R_omega = _weight_matrix(weights.get("R_omega"), 3, "config.weights.R_omega")
    Q_zeta = _weight_matrix(weights.get("Q_zeta"), 9, "config.weights.Q_zeta")
    R_zeta = _weight_matrix(weights.get("R_zeta"), 4, "config.weights.R_zeta")

    dist = _expect(raw, "disturbances", "config", dict)
    _no_strays(dist, ("accel", "alpha", "rate_direct"), "config.disturbances")
    accel_raw = _expect(dist, "accel", "config.disturbances")
    if isinstance(accel_raw, (int, float)):
        accel_raw = [accel_raw]
    if not isinstance(accel_raw, list) or not accel_raw:
        raise ConfigError("config.disturbances.accel must be a number or nonempty list")
    cases = tuple(sorted(_nonnegative(v, "config.disturbances.accel") for v in accel_raw))
    d_alpha = _nonnegative(dist.get("alpha", 0.0), "config.disturbances.alpha")
    d_rate = _nonnegative(dist.get("rate_direct", 0.0), "config.disturbances.rate_direct")

    sim = _expect(raw, "sim", "config", dict)
    _no_strays(sim, ("dt", "duration", "n_runs", "seed", "log_stride",
                     "rate_feedforward"), "config.sim")
    dt = _positive(_expect(sim, "dt", "config.sim"), "config.sim.dt")
    duration = _positive(_expect(sim, "duration", "config.sim"), "config.sim.duration")
    n_runs = _expect(sim, "n_runs", "config.sim", int)
    if n_runs < 1:
        raise ConfigError("config.sim.n_runs must be at least 1")
    seed = _expect(sim, "seed", "config.sim", int)
    stride = sim.get("log_stride", 1)
    if not isinstance(stride, int) or stride < 1:
        raise ConfigError("config.sim.log_stride must be a positive integer")
    feedforward = sim.get("rate_feedforward", False)
    if not isinstance(feedforward, bool):
        raise ConfigError("config.sim.rate_feedforward must be a boolean")

    out_dir = Path(_expect(raw, "out_dir", "config", str))

    return Config(
        params=params,
        envelope_accel=envelope_accel,
        envelope_rate=envelope_rate,
        waypoints=waypoints,
        durations=durations,
        d_accel_cases=cases,
        d_alpha=d_alpha,
        d_rate_direct=d_rate,
        Q_omega=Q_omega, R_omega=R_omega, Q_zeta=Q_zeta, R_zeta=R_zeta,
        dt=dt, duration=duration, n_runs=n_runs, seed=seed,
        log_stride=stride, rate_feedforward=feedforward,
        out_dir=out_dir,
    )


def load_config(path):
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(raw)


# -------------------------------------------------------------- bundles ---

def _matrix_json(M):
    M = np.asarray(M, dtype=float)
    return {"dims": list(M.shape), "data": [float(x) for x in M.ravel()]}


def _matrix_from_json(obj):
    return np.asarray(obj["data"], dtype=float).reshape(obj["dims"])


def bundle_to_json(bundle):
    rate_loop = {
        "K": _matrix_json(bundle.K_omega),
        "bound": [float(x) for x in bundle.omega_bound],
        "P": None,
        "alpha": None,
    }
    if bundle.P_omega is not None:
        rate_loop["P"] = _matrix_json(bundle.P_omega.P)
        rate_loop["alpha"] = float(bundle.P_omega.alpha)
    return {
        "format": BUNDLE_FORMAT,
        "vehicle": {
            "mass": float(bundle.params.mass),
            "inertia": _matrix_json(bundle.params.inertia),
            "gravity": [float(x) for x in bundle.params.gravity],
        },
        "envelope": {
            "accel": [float(x) for x in bundle.envelope_accel],
            "rate": [float(x) for x in bundle.envelope_rate],
        },
        "disturbance": {
            "accel": bundle.d_accel,
            "alpha": bundle.d_alpha,
            "rate_direct": bundle.d_rate_direct,
        },
        "rate_loop": rate_loop,
        "log_error_loop": {
            "K": _matrix_json(bundle.K_zeta),
            "P": _matrix_json(bundle.P_zeta.P),
            "alpha": float(bundle.P_zeta.alpha),
        },
        "distortion": {
            "ratio": bundle.distortion_ratio,
            "inflated": bundle.distortion_inflated,
        },
        "group_set": dataclasses.asdict(bundle.group_set),
    }


def bundle_from_json(obj):
    if obj.get("format") != BUNDLE_FORMAT:
        raise ConfigError(f"bundle format must be {BUNDLE_FORMAT!r}")
    params = VehicleParams(
        mass=obj["vehicle"]["mass"],
        inertia=_matrix_from_json(obj["vehicle"]["inertia"]),
        gravity=np.asarray(obj["vehicle"]["gravity"], dtype=float),
    )
    rate_loop = obj["rate_loop"]
    P_omega = None
    if rate_loop["P"] is not None:
        P_omega = Ellipsoid(P=_matrix_from_json(rate_loop["P"]), alpha=rate_loop["alpha"])
    zl = obj["log_error_loop"]
    return CertBundle(
        params=params,
        envelope_accel=np.asarray(obj["envelope"]["accel"], dtype=float),
        envelope_rate=np.asarray(obj["envelope"]["rate"], dtype=float),
        d_accel=float(obj["disturbance"]["accel"]),
        d_alpha=float(obj["disturbance"]["alpha"]),
        d_rate_direct=float(obj["disturbance"]["rate_direct"]),
        K_omega=_matrix_from_json(rate_loop["K"]),
        P_omega=P_omega,
        omega_bound=np.asarray(rate_loop["bound"], dtype=float),
        K_zeta=_matrix_from_json(zl["K"]),
        P_zeta=Ellipsoid(P=_matrix_from_json(zl["P"]), alpha=zl["alpha"]),
        distortion_ratio=float(obj["distortion"]["ratio"]),
        distortion_inflated=bool(obj["distortion"]["inflated"]),
        group_set=GroupSetSummary(**obj["group_set"]),
    )


def load_bundle(path):
    try:
        obj = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read bundle: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bundle is not valid JSON: {exc}") from None
    return bundle_from_json(obj)


def _write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ------------------------------------------------------------- commands ---

def cmd_certify(config):
    """Certify every disturbance case; returns the written bundle paths."""
    config.out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for label, d_accel in zip(config.case_labels(), config.d_accel_cases):
        bundle = certify_cascade(
            config.params, config.envelope_accel, config.envelope_rate,
            d_accel=d_accel, d_alpha=config.d_alpha,
            d_rate_direct=config.d_rate_direct,
            Q_omega=config.Q_omega, R_omega=config.R_omega,
            Q_zeta=config.Q_zeta, R_zeta=config.R_zeta,
        )
        path = config.out_dir / f"bundle_{label}.json"
        _write_json(path, bundle_to_json(bundle))
        paths.append(path)
    return paths


def _case_label(config, bundle):
    for label, d_accel in zip(config.case_labels(), config.d_accel_cases):
        if d_accel == bundle.d_accel:
            return label
    return f"d{bundle.d_accel:g}"


def _write_history_csv(path, log, stride):
    idx = np.arange(0, len(log.time), stride)
    if idx[-1] != len(log.time) - 1:
        idx = np.append(idx, len(log.time) - 1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for run in range(log.zeta.shape[0]):
            for i in idx:
                row = [run, log.time[i], *log.zeta[run, i], *log.omega_error[run, i],
                       log.lyap_zeta[run, i],
                       log.lyap_omega[run, i] if log.lyap_omega is not None else 0.0]
                writer.writerow([row[0]] + [repr(float(x)) for x in row[1:]])


def cmd_simulate(config, bundle, n_runs=None, seed=None):
    """Monte Carlo against one certificate; returns (csv_path, json_path)."""
    config.out_dir.mkdir(parents=True, exist_ok=True)
    label = _case_label(config, bundle)
    n_runs = config.n_runs if n_runs is None else n_runs
    seed = config.seed if seed is None else seed
    started = _time.perf_counter()
    result = monte_carlo(
        bundle, config.reference(), config.duration, n_runs=n_runs, seed=seed,
        dt=config.dt, rate_feedforward=config.rate_feedforward,
    )
    elapsed = _time.perf_counter() - started
    log = result.log
    report = containment_report(log.time, log.lyap_zeta, errors=log.zeta)

    csv_path = config.out_dir / f"history_{label}.csv"
    _write_history_csv(csv_path, log, config.log_stride)
    summary = {
        "case": label,
        "d_accel": bundle.d_accel,
        "n_runs": n_runs,
        "seed": seed,
        "dt": config.dt,
        "duration": config.duration,
        "aborted": log.aborted,
        "abort_reason": log.abort_reason,
        "max_level": report.max_level,
        "violation_count": report.violation_count,
        "contained": report.contained,
        "run_of_max": report.run_index,
        "time_of_max": report.time_of_max,
        "per_axis_max": [float(x) for x in report.axis_max],
        "rate_error_max_level": (
            float(log.lyap_omega.max()) if log.lyap_omega is not None else None
        ),
        "wall_time_s": elapsed,
    }
    json_path = config.out_dir / f"summary_{label}.json"
    _write_json(json_path, summary)
    return csv_path, json_path


def _read_history_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != HISTORY_COLUMNS:
            raise ConfigError(f"{path}: unexpected history columns {header}")
        rows = np.asarray([[float(v) for v in row] for row in reader])
    if rows.size == 0:
        raise ConfigError(f"{path}: empty history")
    return rows


def cmd_verify(log_paths, bundle, tol=1e-6):
    """Recompute Lyapunov levels of logged errors against the certificate."""
    P = bundle.P_zeta.P
    files = []
    worst = 0.0
    violations = 0
    for path in log_paths:
        rows = _read_history_csv(path)
        zeta = rows[:, 2:11]
        levels = np.einsum("ri,ij,rj->r", zeta, P, zeta)
        count = int(np.count_nonzero(levels > 1.0 + tol))
        worst = max(worst, float(levels.max()))
        violations += count
        files.append({
            "path": str(path),
            "rows": len(rows),
            "max_level": float(levels.max()),
            "violating_rows": count,
        })
    return {
        "certificate_d_accel": bundle.d_accel,
        "tolerance": tol,
        "max_level": worst,
        "violating_rows": violations,
        "contained": violations == 0,
        "files": files,
    }


def _ellipse_polyline(shape2, n=256):
    # boundary of the 2D shadow: the projected shape matrix is the 2x2
    # submatrix of the full shape matrix
    L = np.linalg.cholesky(shape2)
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    circle = np.stack([np.cos(theta), np.sin(theta)])
    return (L @ circle).T


def _write_set_csv(path, polylines):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SET_COLUMNS)
        for block, pair, pts in polylines:
            for i, (u, v) in enumerate(pts):
                writer.writerow([block, pair, i, repr(float(u)), repr(float(v))])


def _algebra_polylines(bundle):
    S = bundle.P_zeta.shape_matrix
    out = []
    for block, axes in _BLOCKS:
        for pair, i, j in _PAIRS:
            sub = S[np.ix_((axes[i], axes[j]), (axes[i], axes[j]))]
            out.append((block, pair, _ellipse_polyline(sub)))
    return out


def _group_polylines(bundle, n_samples=4096):
    pts = bundle.P_zeta.boundary_points(n_samples)
    J = left_jacobian(pts[:, 6:9])
    coords = {
        "position": (J @ pts[:, 0:3, None])[..., 0],
        "velocity": (J @ pts[:, 3:6, None])[..., 0],
        "rotation": pts[:, 6:9],
    }
    out = []
    for block, _ in _BLOCKS:
        for pair, i, j in _PAIRS:
            cloud = coords[block][:, (i, j)]
            hull = ConvexHull(cloud)
            out.append((block, pair, cloud[hull.vertices]))
    return out


def cmd_export(config, bundles, log_paths):
    """Figure-ready set hulls, bounds, and history copies; returns paths."""
    config.out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for bundle in bundles:
        label = _case_label(config, bundle)
        alg = config.out_dir / f"sets_algebra_{label}.csv"
        _write_set_csv(alg, _algebra_polylines(bundle))
        grp = config.out_dir / f"sets_group_{label}.csv"
        _write_set_csv(grp, _group_polylines(bundle))
        bounds = config.out_dir / f"bounds_{label}.json"
        _write_json(bounds, {
            "case": label,
            "d_accel": bundle.d_accel,
            "algebra_axis_bounds": [float(x) for x in bundle.P_zeta.axis_bounds()],
            "rate_axis_bounds": [float(x) for x in bundle.omega_bound],
            "group_set": dataclasses.asdict(bundle.group_set),
        })
        written.extend([alg, grp, bounds])
    for path in log_paths:
        rows = _read_history_csv(Path(path))
        dest = config.out_dir / f"fig_{Path(path).name}"
        with open(dest, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(HISTORY_COLUMNS)
            for row in rows:
                writer.writerow([int(row[0])] + [repr(float(x)) for x in row[1:]])
        written.append(dest)
    return written


# ----------------------------------------------------------------- main ---

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="se23cert",
        description="Certified log-linear tracking control: certify, simulate, "
                    "verify, export.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="run the certification and write bundles")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override the config output directory")

    p = sub.add_parser("simulate", help="Monte Carlo against a certificate")
    p.add_argument("--config", required=True)
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", help="override the config output directory")
    p.add_argument("--runs", type=int, help="override config.sim.n_runs")
    p.add_argument("--seed", type=int, help="override config.sim.seed")

    p = sub.add_parser("verify", help="check logged errors against a certificate")
    p.add_argument("logs", nargs="+", help="history CSV files")
    p.add_argument("--bundle", required=True)

    p = sub.add_parser("export", help="write figure-ready set hulls and histories")
    p.add_argument("logs", nargs="*", help="history CSV files to re-emit")
    p.add_argument("--config", required=True)
    p.add_argument("--bundle", required=True, action="append",
                   help="bundle JSON (repeat for several cases)")
    p.add_argument("--out", help="override the config output directory")
    return parser


def _with_out_dir(config, out):
    if out is None:
        return config
    return dataclasses.replace(config, out_dir=Path(out))


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "certify":
            config = _with_out_dir(load_config(args.config), args.out)
            for path in cmd_certify(config):
                print(path)
            return 0
        if args.command == "simulate":
            config = _with_out_dir(load_config(args.config), args.out)
            bundle = load_bundle(args.bundle)
            csv_path, json_path = cmd_simulate(
                config, bundle, n_runs=args.runs, seed=args.seed
            )
            print(csv_path)
            print(json_path)
            return 0
        if args.command == "verify":
            bundle = load_bundle(args.bundle)
            report = cmd_verify([Path(p) for p in args.logs], bundle)
            print(json.dumps(report, indent=2, sort_keys=True))
            return 0 if report["contained"] else 4
        if args.command == "export":
            config = _with_out_dir(load_config(args.config), args.out)
            bundles = [load_bundle(p) for p in args.bundle]
            for path in cmd_export(config, bundles, args.logs):
                print(path)
            return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
