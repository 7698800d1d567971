"""Trial orchestration, metrics, and cross-trial statistics.

run_trial builds a world from a resolved TrialConfig, steps controllers and
physics in lock-step, and collects pellet, trajectory, and event series.
compare runs seeded batches of trials per mode and aggregates the headline
numbers. The one-way ANOVA here is self-contained (F and p computed from
scratch) so the statistics carry no runtime dependency beyond the stdlib.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from tunnelswarm import config as config_mod
from tunnelswarm.contact_map import MapParams
from tunnelswarm.controller import ACR, BASELINE, RESTING, Controller, ControllerParams
from tunnelswarm.sensing import (
    Observation,
    SensedContact,
    SensorParams,
    classify_contact,
    detect_dig_zone,
    estimate_position,
)
from tunnelswarm.world import (
    ACQUIRED,
    ACTIVE,
    DEPOSITED,
    FAULTY,
    Pose,
    RobotBody,
    Tunnel,
    World,
    WorldParams,
)

ANOVA_WINDOWS = 6  # per-trial deposit counts are binned into this many windows

EVENT_FIELDS = [
    "t", "robot", "event", "k", "p_e", "success", "sensed", "position",
    "response", "r_c", "at",
]


@dataclass
class TrialConfig:
    """Fully resolved, validated parameters for one trial."""

    mode: str
    seed: int
    duration_s: float
    n_active: int
    n_faulty: int
    map_params: MapParams
    bin_width_cm: float
    n_bins: int
    controller_params: ControllerParams
    sensor_params: SensorParams
    tunnel: Tunnel
    world_params: WorldParams
    faulty_pose: tuple
    body_seg_half: float
    body_radius: float
    rest_slots: list
    dig_slot_ys: list
    trajectory_sample_s: float
    map_snapshot_every_s: float
    obstruction_w_position: float
    obstruction_w_angle: float
    raw: dict = field(repr=False, default_factory=dict)

    @classmethod
    def from_dict(cls, overrides: dict) -> "TrialConfig":
        """Resolve a (possibly partial) config dict against the defaults and
        validate every field, naming the offending key on failure."""
        cfg = config_mod.apply_overrides(overrides)
        a = cfg["assumptions"]

        def check(section: str, fn) -> None:
            try:
                fn()
            except ValueError as exc:
                raise config_mod.ConfigError(f"{section}: {exc}") from exc

        mode = cfg["mode"]
        if mode not in (BASELINE, ACR):
            raise config_mod.ConfigError(
                f"mode: must be '{BASELINE}' or '{ACR}', got {mode!r}"
            )
        if not isinstance(cfg["seed"], int):
            raise config_mod.ConfigError(f"seed: must be an integer, got {cfg['seed']!r}")
        if cfg["duration_s"] <= 0:
            raise config_mod.ConfigError(
                f"duration_s: must be > 0, got {cfg['duration_s']}"
            )
        n_active = cfg["n_active"]
        if not isinstance(n_active, int) or n_active < 1:
            raise config_mod.ConfigError(f"n_active: must be an integer >= 1, got {n_active!r}")
        n_faulty = cfg["n_faulty"]
        if n_faulty not in (0, 1):
            raise config_mod.ConfigError(f"n_faulty: must be 0 or 1, got {n_faulty!r}")
        if n_active > len(a["rest_slots"]) or n_active > len(a["dig_slot_ys"]):
            raise config_mod.ConfigError(
                f"n_active: {n_active} robots need that many assumptions.rest_slots "
                f"and assumptions.dig_slot_ys entries"
            )

        m = cfg["map"]
        map_params = MapParams(
            omega_r=m["omega_r"], omega_w=m["omega_w"], weight=m["weight"],
            beta=m["beta"], decay_interval_s=m["decay_interval_s"],
            window_bins=m["window_bins"],
        )
        check("map", map_params.validate)
        bin_width = m["bin_width_cm"]
        if bin_width <= 0:
            raise config_mod.ConfigError(f"map.bin_width_cm: must be > 0, got {bin_width}")

        t = cfg["tunnel"]
        tunnel = Tunnel(length=t["length"], width=t["width"],
                        home_x=t["home_x"], dig_x=t["dig_x"])
        check("tunnel", lambda: tunnel.validate(body_radius=a["body_radius"]))

        n_bins_f = tunnel.length / bin_width
        n_bins = round(n_bins_f)
        if abs(n_bins_f - n_bins) > 1e-9 or n_bins < 1:
            raise config_mod.ConfigError(
                f"map.bin_width_cm: {bin_width} must divide tunnel.length "
                f"{tunnel.length} into a whole number of bins"
            )

        w = cfg["world"]
        world_params = WorldParams(
            mu=w["mu"], kappa=w["kappa"], n_iter=w["n_iter"], eps_pen=w["eps_pen"],
            dt=w["dt"], v_max=w["v_max"], omega_max=w["omega_max"],
            t_dig=a["t_dig_s"],
        )
        check("world", world_params.validate)

        c = cfg["controller"]
        controller_params = ControllerParams(
            mode=mode, p_r=c["p_r"], delta_r=c["delta_r"],
            t_give_up=c["t_give_up"], t_rest=c["t_rest"], t_dig=a["t_dig_s"],
            invert_reversal=bool(c["invert_reversal"]),
            v_cruise=a["v_cruise_cm_s"], omega_max=w["omega_max"],
            heading_gain=a["heading_gain"], goal_tol=a["goal_tol"],
            backup_dist=a["backup_dist"], backup_speed=a["backup_speed"],
            turn_jitter_deg=a["turn_jitter_deg"],
            engage_r_c=a["engage_r_c"], engage_min_x=a["engage_min_x"],
            push_burst_s=a["push_burst_s"], push_progress_cm=a["push_progress_cm"], push_max_s=a["push_max_s"],
            probe_dist=a["probe_dist"],
            lookahead=a["lookahead_cm"], arc_floor=a["arc_floor"],
        )
        check("controller", controller_params.validate)

        s = cfg["sensing"]
        sensor_params = SensorParams(
            omega_r=m["omega_r"] if s["omega_r"] is None else s["omega_r"],
            omega_w=m["omega_w"] if s["omega_w"] is None else s["omega_w"],
            sigma_loc=s["sigma_loc"], dig_zone_range=s["dig_zone_range"],
        )
        check("sensing", sensor_params.validate)

        f = cfg["faulty"]
        theta = math.radians(f["theta_deg"])
        if n_faulty and not (0 <= f["x"] <= tunnel.length and 0 <= f["y"] <= tunnel.width):
            raise config_mod.ConfigError(
                f"faulty.x/faulty.y: ({f['x']}, {f['y']}) outside the tunnel"
            )
        if a["body_seg_half"] <= 0 or a["body_radius"] <= 0:
            raise config_mod.ConfigError(
                "assumptions.body_seg_half and assumptions.body_radius must be > 0"
            )
        if a["trajectory_sample_s"] <= 0:
            raise config_mod.ConfigError(
                f"assumptions.trajectory_sample_s: must be > 0, got {a['trajectory_sample_s']}"
            )
        w_pos, w_ang = a["obstruction_w_position"], a["obstruction_w_angle"]
        if w_pos < 0 or w_ang < 0 or w_pos + w_ang <= 0:
            raise config_mod.ConfigError(
                "assumptions.obstruction_w_position/_angle must be >= 0 and sum > 0"
            )

        rest_slots = [tuple(map(float, s)) for s in a["rest_slots"]]
        for sx, sy in rest_slots:
            if not (0 < sx < tunnel.dig_x and 0 < sy < tunnel.width):
                raise config_mod.ConfigError(
                    f"assumptions.rest_slots: slot ({sx}, {sy}) must sit between "
                    f"the walls and short of the dig zone "
                    f"(0 < x < {tunnel.dig_x}, 0 < y < {tunnel.width})"
                )

        return cls(
            mode=mode, seed=cfg["seed"], duration_s=cfg["duration_s"],
            n_active=n_active, n_faulty=n_faulty,
            map_params=map_params, bin_width_cm=bin_width, n_bins=n_bins,
            controller_params=controller_params, sensor_params=sensor_params,
            tunnel=tunnel, world_params=world_params,
            faulty_pose=(f["x"], f["y"], theta),
            body_seg_half=a["body_seg_half"], body_radius=a["body_radius"],
            rest_slots=rest_slots, dig_slot_ys=list(a["dig_slot_ys"]),
            trajectory_sample_s=a["trajectory_sample_s"],
            map_snapshot_every_s=a["map_snapshot_every_s"],
            obstruction_w_position=w_pos, obstruction_w_angle=w_ang,
            raw=cfg,
        )


@dataclass
class TrialResult:
    mode: str
    seed: int
    duration_s: float
    pellets: int
    deposits: list                 # [(t, cumulative count), ...]
    final_faulty_pose: tuple | None
    obstruction: float | None
    per_robot: dict                # rid -> stats + final p_e, k
    events: list                   # controller decision log (csv table)
    trajectories: list             # (t, id, x, y, theta) rows (csv table)
    final_maps: dict               # rid -> channel lists (acr only)
    map_snapshots: list
    unresolved_steps: int


def obstruction_index(pose, tunnel: Tunnel, w_position: float = 0.5,
                      w_angle: float = 0.5) -> float:
    """How much a body at this pose obstructs traffic, in [0, 1].

    0 = parked at the home mouth parallel to the tunnel; 1 = at the dig end
    lying across it. Weights are normalized so the bounds hold for any
    non-negative pair.
    """
    x, theta = pose[0], pose[2]
    total = w_position + w_angle
    pos_term = min(1.0, max(0.0, x / tunnel.length))
    return (w_position * pos_term + w_angle * abs(math.sin(theta))) / total


# --- one-way ANOVA (self-contained) -------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    """Continued-fraction core of the regularized incomplete beta."""
    max_iter = 300
    eps = 3e-16
    fpmin = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def _betainc_reg(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_survival(f_stat: float, df_between: int, df_within: int) -> float:
    """P(F >= f_stat) for the F distribution."""
    if f_stat <= 0.0:
        return 1.0
    if math.isinf(f_stat):
        return 0.0
    x = df_within / (df_within + df_between * f_stat)
    return _betainc_reg(df_within / 2.0, df_between / 2.0, x)


def one_way_anova(groups) -> tuple:
    """F statistic and p-value across groups of real samples.

    Degenerate input (every value identical) is rejected; zero within-group
    variance with distinct means yields (inf, 0.0).
    """
    if len(groups) < 2:
        raise ValueError(f"need >= 2 groups, got {len(groups)}")
    for i, g in enumerate(groups):
        if len(g) < 2:
            raise ValueError(f"group {i} needs >= 2 samples, got {len(g)}")
    sizes = [len(g) for g in groups]
    n_total = sum(sizes)
    k = len(groups)
    grand = sum(sum(g) for g in groups) / n_total
    means = [sum(g) / len(g) for g in groups]
    ssb = sum(n * (m - grand) ** 2 for n, m in zip(sizes, means))
    ssw = sum(sum((x - m) ** 2 for x in g) for g, m in zip(groups, means))
    df_b = k - 1
    df_w = n_total - k
    if ssw == 0.0 and ssb == 0.0:
        raise ValueError("degenerate ANOVA input: all values identical")
    msb = ssb / df_b
    msw = ssw / df_w
    if msw == 0.0:
        return math.inf, 0.0
    f_stat = msb / msw
    return f_stat, f_survival(f_stat, df_b, df_w)


# --- trial engine -----------------------------------------------------------------


def _initial_bodies(tc: TrialConfig) -> list:
    bodies = []
    for i in range(tc.n_active):
        sx, sy = tc.rest_slots[i]
        bodies.append(RobotBody(
            rid=i, kind=ACTIVE, pose=Pose(sx, sy, 0.0),
            seg_half=tc.body_seg_half, radius=tc.body_radius,
        ))
    if tc.n_faulty:
        x, y, theta = tc.faulty_pose
        bodies.append(RobotBody(
            rid=tc.n_active, kind=FAULTY, pose=Pose(x, y, theta),
            seg_half=tc.body_seg_half, radius=tc.body_radius,
        ))
    return bodies


def run_trial(tc: TrialConfig) -> TrialResult:
    world = World(tc.tunnel, _initial_bodies(tc), tc.world_params)
    seq = np.random.SeedSequence(tc.seed)
    children = seq.spawn(2 * tc.n_active)
    controllers = []
    sense_rngs = []
    for i in range(tc.n_active):
        controllers.append(Controller(
            rid=i, params=tc.controller_params, tunnel=tc.tunnel,
            tip_offset=tc.body_seg_half + tc.body_radius,
            rest_slot=tc.rest_slots[i], dig_slot_y=tc.dig_slot_ys[i],
            map_params=tc.map_params, n_bins=tc.n_bins, bin_width=tc.bin_width_cm,
            rng=np.random.default_rng(children[2 * i]), dt=tc.world_params.dt,
        ))
        sense_rngs.append(np.random.default_rng(children[2 * i + 1]))

    dt = tc.world_params.dt
    n_steps = round(tc.duration_s / dt)
    sample_every = max(1, round(tc.trajectory_sample_s / dt))
    snapshot_every = (
        max(1, round(tc.map_snapshot_every_s / dt)) if tc.map_snapshot_every_s > 0 else 0
    )

    events: list = []
    trajectories: list = []
    map_snapshots: list = []
    pending: dict = {i: [] for i in range(tc.n_active)}

    def sample_trajectories(t: float) -> None:
        for b in world.bodies:
            p = b.pose
            trajectories.append((round(t, 3), b.rid, p.x, p.y, p.theta))

    sample_trajectories(0.0)

    for step in range(n_steps):
        commands = {}
        for i, ctrl in enumerate(controllers):
            body = world.body(i)
            contacts = [] if ctrl.fsm == RESTING else pending[i]
            dig = detect_dig_zone(body.pose.x, body.pose.theta, body.tip_offset,
                                  tc.tunnel.dig_x, tc.sensor_params)
            obs = Observation(clock=world.clock, x=body.pose.x, y=body.pose.y,
                              theta=body.pose.theta, dig_zone=dig, contacts=contacts)
            cmd = ctrl.tick(obs).clamped(tc.world_params.v_max, tc.world_params.omega_max)
            commands[i] = (cmd.linear, cmd.angular)

        step_events = world.step(commands)
        clock = world.clock

        for i, ctrl in enumerate(controllers):
            outcome = world.pellet_interaction(i, ctrl.carrying, ctrl.dig_dwell)
            if outcome == ACQUIRED:
                ctrl.notify_pellet_acquired(clock)
            elif outcome == DEPOSITED:
                ctrl.notify_deposit(clock)

        # fan physical contacts out to each active participant's next
        # observation, applying that robot's own sensing noise
        pending = {i: [] for i in range(tc.n_active)}
        for ev in step_events:
            for rid, normal in _participants(ev, tc.n_active):
                body = world.body(rid)
                sensed_type = classify_contact(ev.true_type, tc.sensor_params,
                                               sense_rngs[rid])
                position = estimate_position(body.pose.x, tc.tunnel.length,
                                             tc.sensor_params, sense_rngs[rid])
                pending[rid].append(SensedContact(sensed_type, position, normal))
        for bucket in pending.values():
            bucket.sort(key=lambda c: c.sensed_type != "robot")

        for ctrl in controllers:
            if ctrl.events:
                events.extend(ctrl.events)
                ctrl.events.clear()

        if (step + 1) % sample_every == 0:
            sample_trajectories(clock)
        if snapshot_every and (step + 1) % snapshot_every == 0:
            for ctrl in controllers:
                if ctrl.contact_map is not None:
                    map_snapshots.append({
                        "t": round(clock, 3), "robot": ctrl.rid,
                        **ctrl.contact_map.to_lists(),
                    })

    final_faulty = None
    obstruction = None
    if tc.n_faulty:
        p = world.body(tc.n_active).pose
        final_faulty = (p.x, p.y, p.theta)
        obstruction = obstruction_index(final_faulty, tc.tunnel,
                                        tc.obstruction_w_position,
                                        tc.obstruction_w_angle)

    per_robot = {}
    for ctrl in controllers:
        per_robot[ctrl.rid] = {
            **ctrl.stats, "final_p_e": ctrl.p_e, "k": ctrl.k,
        }
    final_maps = {
        ctrl.rid: ctrl.contact_map.to_lists()
        for ctrl in controllers if ctrl.contact_map is not None
    }

    return TrialResult(
        mode=tc.mode, seed=tc.seed, duration_s=tc.duration_s,
        pellets=world.pellets, deposits=list(world.deposits),
        final_faulty_pose=final_faulty, obstruction=obstruction,
        per_robot=per_robot, events=events, trajectories=trajectories,
        final_maps=final_maps, map_snapshots=map_snapshots,
        unresolved_steps=world.unresolved_steps,
    )


def _participants(ev, n_active: int):
    """Active robots that felt this contact, with the normal oriented from
    the other object into that robot."""
    out = []
    if ev.a < n_active:
        out.append((ev.a, ev.normal))
    if ev.b is not None and ev.b < n_active:
        out.append((ev.b, (-ev.normal[0], -ev.normal[1])))
    return out


# --- comparisons ---------------------------------------------------------------------


@dataclass
class ComparisonSummary:
    modes: list
    n_trials: int
    seed_base: int
    per_mode: dict          # mode -> headline stats dict
    ratio: float | None     # acr mean pellets / baseline mean pellets
    results: dict           # mode -> [TrialResult, ...]


def _deposit_window_counts(result: TrialResult, n_windows: int = ANOVA_WINDOWS) -> list:
    counts = [0] * n_windows
    for t, _ in result.deposits:
        idx = min(n_windows - 1, int(t / result.duration_s * n_windows))
        counts[idx] += 1
    return counts


def _mode_summary(results: list) -> dict:
    finals = [r.pellets for r in results]
    mean = sum(finals) / len(finals)
    if len(finals) > 1:
        var = sum((x - mean) ** 2 for x in finals) / (len(finals) - 1)
    else:
        var = 0.0
    groups = [_deposit_window_counts(r) for r in results]
    try:
        f_stat, p_val = one_way_anova(groups)
        if math.isinf(f_stat):
            f_stat = None
    except ValueError:
        f_stat, p_val = None, None
    obstructions = [r.obstruction for r in results if r.obstruction is not None]
    faulty_x = [r.final_faulty_pose[0] for r in results if r.final_faulty_pose]
    pushes = [
        sum(stats["active_pushes"] for stats in r.per_robot.values()) for r in results
    ]
    return {
        "final_pellets": finals,
        "mean_pellets": mean,
        "std_pellets": math.sqrt(var),
        "anova_f": f_stat,
        "anova_p": p_val,
        "mean_obstruction": (sum(obstructions) / len(obstructions)) if obstructions else None,
        "median_faulty_x": (float(np.median(faulty_x)) if faulty_x else None),
        "active_push_counts": pushes,
        "total_active_pushes": sum(pushes),
        "give_ups": [
            sum(stats["give_ups"] for stats in r.per_robot.values()) for r in results
        ],
    }


def trial_configs_for_compare(base_overrides: dict, modes, n_trials: int,
                              seed_base: int) -> list:
    if n_trials < 2:
        raise config_mod.ConfigError(f"n_trials must be >= 2, got {n_trials}")
    out = []
    for mode in modes:
        for i in range(n_trials):
            overrides = json.loads(json.dumps(base_overrides))  # deep copy
            overrides["mode"] = mode
            overrides["seed"] = seed_base + i
            out.append(TrialConfig.from_dict(overrides))
    return out


def compare(base_overrides: dict, modes=(BASELINE, ACR), n_trials: int = 20,
            seed_base: int = 0, jobs: int = 1) -> ComparisonSummary:
    """Run n_trials per mode with seeds seed_base..seed_base+n_trials-1.

    Trials are independent; execution order (or parallelism) cannot change
    any individual result. Aggregation folds over results sorted by seed.
    """
    modes = list(modes)
    configs = trial_configs_for_compare(base_overrides, modes, n_trials, seed_base)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            all_results = list(pool.map(run_trial, configs))
    else:
        all_results = [run_trial(tc) for tc in configs]

    results = {mode: [] for mode in modes}
    for tc, res in zip(configs, all_results):
        results[tc.mode].append(res)
    for mode in modes:
        results[mode].sort(key=lambda r: r.seed)

    per_mode = {mode: _mode_summary(results[mode]) for mode in modes}
    ratio = None
    if BASELINE in per_mode and ACR in per_mode:
        base_mean = per_mode[BASELINE]["mean_pellets"]
        acr_mean = per_mode[ACR]["mean_pellets"]
        if base_mean > 0:
            ratio = acr_mean / base_mean
        elif acr_mean == 0:
            # both modes scored nothing (e.g. a horizon shorter than one
            # trip): identical performance, not an undefined ratio
            ratio = 1.0
    return ComparisonSummary(
        modes=modes, n_trials=n_trials, seed_base=seed_base,
        per_mode=per_mode, ratio=ratio, results=results,
    )


# --- serialization -----------------------------------------------------------------


def result_to_dict(r: TrialResult) -> dict:
    """result.json payload: everything but the two CSV tables."""
    return {
        "mode": r.mode,
        "seed": r.seed,
        "duration_s": r.duration_s,
        "pellets": r.pellets,
        "deposits": [[t, c] for t, c in r.deposits],
        "final_faulty_pose": (
            {"x": r.final_faulty_pose[0], "y": r.final_faulty_pose[1],
             "theta": r.final_faulty_pose[2]}
            if r.final_faulty_pose else None
        ),
        "obstruction": r.obstruction,
        "per_robot": {str(k): v for k, v in r.per_robot.items()},
        "final_maps": {str(k): v for k, v in r.final_maps.items()},
        "map_snapshots": r.map_snapshots,
        "unresolved_steps": r.unresolved_steps,
        "n_events": len(r.events),
    }


def summary_to_dict(s: ComparisonSummary, config_echo: dict | None = None) -> dict:
    return {
        "modes": s.modes,
        "n_trials": s.n_trials,
        "seed_base": s.seed_base,
        "per_mode": s.per_mode,
        "acr_over_baseline_pellet_ratio": s.ratio,
        "config": config_echo,
    }


def canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False)


def atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_trial_outputs(result: TrialResult, outdir: str, config_echo: dict) -> None:
    os.makedirs(outdir, exist_ok=True)
    payload = result_to_dict(result)
    payload["config"] = config_echo
    atomic_write_text(os.path.join(outdir, "result.json"), canonical_json(payload))

    tmp = os.path.join(outdir, f"trajectories.csv.tmp.{os.getpid()}")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "id", "x", "y", "theta"])
        for t, rid, x, y, theta in result.trajectories:
            writer.writerow([t, rid, f"{x:.4f}", f"{y:.4f}", f"{theta:.5f}"])
    os.replace(tmp, os.path.join(outdir, "trajectories.csv"))

    tmp = os.path.join(outdir, f"events.csv.tmp.{os.getpid()}")
    with open(tmp, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=EVENT_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for ev in result.events:
            writer.writerow(ev)
    os.replace(tmp, os.path.join(outdir, "events.csv"))


def pellet_timeseries_rows(summary: ComparisonSummary, grid_s: float = 10.0) -> list:
    """Rows of (t, then mean/std cumulative pellets per mode) for plotting."""
    duration = max(
        (r.duration_s for results in summary.results.values() for r in results),
        default=0.0,
    )
    n_points = int(duration / grid_s) + 1
    rows = []
    header = ["t"]
    for mode in summary.modes:
        header += [f"mean_{mode}", f"std_{mode}"]
    rows.append(header)
    for i in range(n_points):
        t = i * grid_s
        row = [t]
        for mode in summary.modes:
            counts = []
            for r in summary.results[mode]:
                c = 0
                for dep_t, cum in r.deposits:
                    if dep_t <= t:
                        c = cum
                    else:
                        break
                counts.append(c)
            mean = sum(counts) / len(counts)
            if len(counts) > 1:
                var = sum((x - mean) ** 2 for x in counts) / (len(counts) - 1)
            else:
                var = 0.0
            row += [round(mean, 4), round(math.sqrt(var), 4)]
        rows.append(row)
    return rows


def write_compare_outputs(summary: ComparisonSummary, outdir: str,
                          config_echo: dict | None = None) -> None:
    os.makedirs(outdir, exist_ok=True)
    for mode in summary.modes:
        for r in summary.results[mode]:
            trial_echo = dict(config_echo or {})
            trial_echo.update({"mode": mode, "seed": r.seed})
            write_trial_outputs(
                r, os.path.join(outdir, f"{mode}_seed{r.seed}"), config_echo=trial_echo,
            )
    atomic_write_text(
        os.path.join(outdir, "summary.json"),
        canonical_json(summary_to_dict(summary, config_echo)),
    )
    tmp = os.path.join(outdir, f"pellets_timeseries.csv.tmp.{os.getpid()}")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in pellet_timeseries_rows(summary):
            writer.writerow(row)
    os.replace(tmp, os.path.join(outdir, "pellets_timeseries.csv"))
