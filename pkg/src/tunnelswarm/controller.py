"""Per-robot two-layer controller.

Upper layer: trip decisions. A robot repeatedly draws against its entrance
probability p_e to either enter the tunnel or rest, digs at the face until
it holds a pellet, carries it home, and adapts p_e by +/- delta_r on trip
success/failure.

Lower layer: contact responses. A felt contact interrupts navigation with
one of three maneuvers: a passive back-up-and-random-turn, a reversal
(abandon the trip and head home, drawn with probability p_r en route out),
or, in acr mode only, an active push against what the contact map says is
probably a faulty robot.

Controllers see only their own Observation each tick. There is no channel
to another robot's pose, state, or map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from tunnelswarm.contact_map import ROBOT, WALL, ContactMap, MapParams
from tunnelswarm.sensing import Observation, SensedContact
from tunnelswarm.world import Tunnel

# fsm states
GOING_TO_DIG = "GoingToDig"
DIGGING = "Digging"
GOING_HOME = "GoingHome"
RESTING = "Resting"
COLLISION = "Collision"

# contact responses
PASSIVE = "PassiveManeuver"
REVERSAL = "Reversal"
ACTIVE_PUSH = "ActivePush"

# begin_trip outcomes
ENTER_TUNNEL = "EnterTunnel"
REST = "Rest"

BASELINE = "baseline"
ACR = "acr"


@dataclass
class ControllerParams:
    mode: str = BASELINE
    p_r: float = 0.64
    delta_r: float = 0.1
    t_give_up: float = 60.0
    t_rest: float = 30.0
    t_dig: float = 30.0
    # Reversal is drawn as q < p_r; the flag flips the comparison for
    # sensitivity studies against the opposite reading.
    invert_reversal: bool = False
    v_cruise: float = 10.0
    omega_max: float = 1.5
    heading_gain: float = 2.0
    goal_tol: float = 2.0
    backup_dist: float = 10.0
    backup_speed: float = 5.0
    turn_jitter_deg: float = 20.0
    push_burst_s: float = 3.0
    push_progress_cm: float = 2.0
    push_max_s: float = 25.0
    probe_dist: float = 50.0
    lookahead: float = 25.0
    arc_floor: float = 0.2
    engage_r_c: float = 0.7
    engage_min_x: float = 80.0

    def validate(self) -> None:
        if self.mode not in (BASELINE, ACR):
            raise ValueError(f"mode must be baseline or acr, got {self.mode!r}")
        if not 0.0 <= self.p_r <= 1.0:
            raise ValueError(f"p_r must be in [0, 1], got {self.p_r}")
        if not 0.0 < self.delta_r <= 1.0:
            raise ValueError(f"delta_r must be in (0, 1], got {self.delta_r}")
        for name in ("t_give_up", "t_rest", "t_dig", "v_cruise", "omega_max",
                     "backup_dist", "backup_speed", "push_burst_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0.0 <= self.turn_jitter_deg < 90.0:
            raise ValueError(
                f"turn_jitter_deg must be in [0, 90), got {self.turn_jitter_deg}")


@dataclass
class MotorCommand:
    linear: float = 0.0
    angular: float = 0.0

    def clamped(self, v_max: float, omega_max: float) -> "MotorCommand":
        return MotorCommand(
            min(v_max, max(-v_max, self.linear)),
            min(omega_max, max(-omega_max, self.angular)),
        )


@dataclass
class Maneuver:
    kind: str               # passive | reversal | push
    resume: str             # fsm state to return to when done
    phase: str              # backup | turn | push_burst
    phase_until: float
    back_v: float = -5.0    # signed retreat velocity, away from the contact
    turn_cmd: float = 0.0
    probe_v: float = 0.0    # signed press velocity along the travel direction
    push_dir: tuple = (0.0, 0.0)
    burst_origin: tuple | None = None
    episode_start: float = 0.0
    push_deadline: float = 0.0


def _wrap(a: float) -> float:
    return math.atan2(math.sin(a), math.cos(a))


def respond_to_contact(fsm: str, mode: str, sensed_type: str, r_c: float,
                       p_r: float, invert_reversal: bool, rng) -> str:
    """Pure contact-response policy shared by both modes.

    Wall contacts always yield the passive maneuver. Robot contacts on the
    way out may trigger a reversal; robot contacts on the way home may
    trigger an active push, but only in acr mode and only as likely as the
    caller's faulty-robot belief r_c.
    """
    if fsm not in (GOING_TO_DIG, DIGGING, GOING_HOME):
        raise ValueError(f"contact delivered in state {fsm}; sensors are inactive")
    if sensed_type == WALL:
        return PASSIVE
    if sensed_type != ROBOT:
        raise ValueError(f"unknown sensed contact type {sensed_type!r}")
    if fsm == GOING_TO_DIG:
        q = rng.random()
        hit = (q > p_r) if invert_reversal else (q < p_r)
        return REVERSAL if hit else PASSIVE
    if fsm == GOING_HOME and mode == ACR:
        q = rng.random()
        return ACTIVE_PUSH if q < r_c else PASSIVE
    return PASSIVE


class Controller:
    """Decision layer for one active robot."""

    def __init__(self, rid: int, params: ControllerParams, tunnel: Tunnel,
                 tip_offset: float, rest_slot: tuple, dig_slot_y: float,
                 map_params: MapParams, n_bins: int, bin_width: float,
                 rng, dt: float):
        params.validate()
        self.rid = rid
        self.params = params
        self.tunnel = tunnel
        self.tip_offset = tip_offset
        self.rest_slot = (float(rest_slot[0]), float(rest_slot[1]))
        self.dig_slot_y = dig_slot_y
        self.rng = rng
        self.dt = dt
        self.map_params = map_params
        self.contact_map = (
            ContactMap(n_bins=n_bins, bin_width_cm=bin_width) if params.mode == ACR else None
        )

        self.fsm = RESTING
        self.k = 1
        self.p_e = 1.0
        self.carrying = False
        self.trip_start_time = 0.0
        self.state_entry_time = 0.0
        self.dig_phase_start = 0.0
        self.dig_dwell = 0.0
        self.maneuver: Maneuver | None = None
        self._started = False
        self._active_time_since_decay = 0.0
        self._last_robot_contact = -math.inf

        self.events: list = []
        self.stats = {
            "trips": 0, "deposits": 0, "reversals": 0, "active_pushes": 0,
            "give_ups": 0, "rests": 0, "passive_maneuvers": 0,
        }

    # --- event plumbing ------------------------------------------------------

    def _emit(self, t: float, kind: str, **extra) -> None:
        self.events.append({"t": round(t, 6), "robot": self.rid, "event": kind, **extra})

    # --- upper layer: trips ----------------------------------------------------

    def begin_trip(self, clock: float) -> str:
        """Draw against p_e: enter the tunnel or rest for t_rest."""
        u = self.rng.random()
        if u < self.p_e:
            self.fsm = GOING_TO_DIG
            self.trip_start_time = clock
            self.state_entry_time = clock
            self.stats["trips"] += 1
            self._emit(clock, "trip_start", k=self.k, p_e=round(self.p_e, 6))
            return ENTER_TUNNEL
        self.fsm = RESTING
        self.state_entry_time = clock
        self.stats["rests"] += 1
        self._emit(clock, "rest_start", k=self.k, p_e=round(self.p_e, 6))
        return REST

    def on_trip_end(self, clock: float, success: bool) -> None:
        step = self.params.delta_r if success else -self.params.delta_r
        self.p_e = min(1.0, max(0.0, self.p_e + step))
        self._emit(clock, "trip_end", k=self.k, success=success, p_e=round(self.p_e, 6))
        self.k += 1
        self.carrying = False
        self.maneuver = None
        self.begin_trip(clock)

    # --- notifications from the world arbiter ---------------------------------

    def notify_pellet_acquired(self, clock: float) -> None:
        self.carrying = True
        self.dig_dwell = 0.0
        self.fsm = GOING_HOME
        self.state_entry_time = clock
        self.maneuver = None
        self._emit(clock, "pellet_acquired", k=self.k)

    def notify_deposit(self, clock: float) -> None:
        self.stats["deposits"] += 1
        self._emit(clock, "deposit", k=self.k)
        self.on_trip_end(clock, success=True)

    # --- lower layer: contacts -------------------------------------------------

    def on_contact(self, clock: float, contact: SensedContact, own_x: float,
                   own_theta: float = 0.0) -> str | None:
        """Handle one sensed contact episode; returns the chosen response.

        Contacts arriving while a maneuver is already running only refresh
        the robot-contact clock (used by push progress checks); they do not
        open a new episode.
        """
        if self.fsm == RESTING:
            raise ValueError("contact delivered while Resting; sensors are inactive")
        if contact.sensed_type == ROBOT:
            self._last_robot_contact = clock
        if self.fsm == COLLISION:
            # the running maneuver keeps going; a probe in particular must
            # hold its pressure through contact or it could never squeeze
            # past anything
            return None

        p = self.params
        own_x = min(max(own_x, 0.0), self.tunnel.length - 1e-6)
        r_c = 0.5
        if self.contact_map is not None:
            self.contact_map.record_contact(self.map_params, contact.sensed_type,
                                            contact.position_cm)
            r_c = self.contact_map.faulty_likelihood(self.map_params, own_x)

        response = respond_to_contact(self.fsm, p.mode, contact.sensed_type, r_c,
                                      p.p_r, p.invert_reversal, self.rng)
        self._emit(clock, "contact", sensed=contact.sensed_type,
                   position=round(contact.position_cm, 3), response=response,
                   r_c=round(r_c, 6))
        # retreat along the contact normal, which points away from whatever
        # was hit; a tail-first traveler hit from behind retreats forward
        nx, ny = contact.normal
        along = nx * math.cos(own_theta) + ny * math.sin(own_theta)
        back_v = p.backup_speed if along > 0.0 else -p.backup_speed
        if response == REVERSAL:
            self.stats["reversals"] += 1
            self._emit(clock, "reversal", k=self.k)
            self._start_backup(clock, kind="reversal", resume=GOING_HOME, back_v=back_v)
        elif response == ACTIVE_PUSH:
            self.stats["active_pushes"] += 1
            self._emit(clock, "active_push", k=self.k, r_c=round(r_c, 6))
            self._start_push(clock, back_v, contact.normal)
        else:
            self.stats["passive_maneuvers"] += 1
            resume = self.fsm if self.fsm != COLLISION else GOING_HOME
            self._start_backup(clock, kind="passive", resume=resume, back_v=back_v)
        return response

    def _start_backup(self, clock: float, kind: str, resume: str,
                      back_v: float | None = None) -> None:
        p = self.params
        self.fsm = COLLISION
        self.maneuver = Maneuver(
            kind=kind, resume=resume, phase="backup",
            phase_until=clock + p.backup_dist / p.backup_speed,
            back_v=-p.backup_speed if back_v is None else back_v,
            episode_start=clock,
        )

    def _start_push(self, clock: float, back_v: float,
                    normal: tuple) -> None:
        # press into the contact, but never away from home: shoving a
        # blocker deeper into the tunnel would make it more obstructive.
        # Keeping the press on the contact normal holds it against a
        # tilted face, where a home-ward shove keeps levering the body
        # around toward lengthwise
        p = self.params
        px, py = min(-0.3, -normal[0]), -normal[1]
        norm = math.hypot(px, py)
        px, py = px / norm, py / norm
        self.fsm = COLLISION
        self.maneuver = Maneuver(
            kind="push", resume=GOING_HOME, phase="push_burst",
            phase_until=clock + p.push_burst_s,
            back_v=back_v,
            push_dir=(px, py),
            episode_start=clock,
            push_deadline=clock + p.push_max_s,
        )

    # --- per-tick behavior ------------------------------------------------------

    def tick(self, obs: Observation) -> MotorCommand:
        p = self.params
        if not self._started:
            self._started = True
            self.state_entry_time = obs.clock
            self.begin_trip(obs.clock)

        self._accrue_decay()
        self._check_give_up(obs.clock)

        for contact in obs.contacts:
            if self.fsm == RESTING:
                break  # a fresh rest decision mid-tick silences the rest
            self.on_contact(obs.clock, contact, obs.x, obs.theta)

        if self.fsm == RESTING:
            if obs.clock - self.state_entry_time >= p.t_rest:
                self.begin_trip(obs.clock)
            if self.fsm == RESTING:
                return self._tick_resting(obs)

        if self.fsm == COLLISION:
            return self._tick_maneuver(obs)

        if self.fsm == GOING_TO_DIG:
            if obs.dig_zone:
                self.fsm = DIGGING
                self.state_entry_time = obs.clock
                self.dig_phase_start = obs.clock
                self.dig_dwell = 0.0
                self._emit(obs.clock, "dig_start", k=self.k)
            else:
                return self._steer_outbound(obs)

        if self.fsm == DIGGING:
            return self._tick_digging(obs)

        if self.fsm == GOING_HOME:
            if obs.x < self.tunnel.home_x and not self.carrying:
                self.on_trip_end(obs.clock, success=False)
                return MotorCommand()
            return self._steer_inbound(obs)

        return MotorCommand()

    # --- state behaviors ---------------------------------------------------------

    def _check_give_up(self, clock: float) -> None:
        p = self.params
        en_route = self.fsm == GOING_TO_DIG or (
            self.fsm == COLLISION and self.maneuver is not None
            and self.maneuver.resume == GOING_TO_DIG
        )
        if en_route and clock - self.trip_start_time > p.t_give_up:
            self._emit(clock, "give_up", k=self.k)
            self.stats["give_ups"] += 1
            self.maneuver = None
            self.fsm = GOING_HOME
            self.state_entry_time = clock
            return
        # a robot wedged at the face also gives up rather than digging
        # forever; the anchor survives collision round trips, or a blocked
        # digger would reset its own clock with every maneuver
        at_face = self.fsm == DIGGING or (
            self.fsm == COLLISION and self.maneuver is not None
            and self.maneuver.resume == DIGGING
        )
        if at_face and clock - self.dig_phase_start > p.t_give_up + p.t_dig:
            self._emit(clock, "give_up", k=self.k, at="dig_face")
            self.stats["give_ups"] += 1
            self.maneuver = None
            self.fsm = GOING_HOME
            self.state_entry_time = clock

    def _tick_digging(self, obs: Observation) -> MotorCommand:
        if not obs.dig_zone:
            # knocked out of sensing range: approach again
            self.fsm = GOING_TO_DIG
            self.dig_dwell = 0.0
            return self._steer_outbound(obs)
        anterior_x = obs.x + self.tip_offset * math.cos(obs.theta)
        if anterior_x > self.tunnel.dig_x:
            self.dig_dwell += self.dt
        else:
            self.dig_dwell = 0.0
        target_x = self.tunnel.length - self.tip_offset - 4.0
        return self._steer(obs, target_x, self.dig_slot_y, p_speed=4.0)

    def _tick_resting(self, obs: Observation) -> MotorCommand:
        # back tail-first into the slot; the body keeps facing the dig end
        return self._steer(obs, self.rest_slot[0], self.rest_slot[1],
                           self.params.v_cruise)

    def _steer_outbound(self, obs: Observation) -> MotorCommand:
        # each robot keeps to its own altitude for the whole transit, so
        # traffic in the open tunnel never crosses
        p = self.params
        face_x = self.tunnel.length - self.tip_offset - 4.0
        return self._steer(obs, min(obs.x + p.lookahead, face_x),
                           self.dig_slot_y, p.v_cruise)

    def _steer_inbound(self, obs: Observation) -> MotorCommand:
        # aim well inside the home zone: the trip ends on crossing into it,
        # so the target must never stop short of the boundary
        p = self.params
        home_tx = min(self.rest_slot[0], self.tunnel.home_x - 6.0)
        ty = self.rest_slot[1]
        if self.contact_map is not None and obs.x > p.engage_min_x:
            # a robot that believes a stuck robot blocks the stretch ahead
            # returns straight through it rather than around it, so the
            # contact response gets its chance to clear the blockage
            ahead_x = max(obs.x - p.lookahead, 0.0)
            if ahead_x > p.engage_min_x:
                r_c = self.contact_map.faulty_likelihood(self.map_params, ahead_x)
                if r_c > p.engage_r_c:
                    ty = self.tunnel.width / 2.0
        if obs.x > self.tunnel.home_x + 15.0:
            return self._steer(obs, max(obs.x - p.lookahead, home_tx),
                               ty, p.v_cruise)
        return self._steer(obs, home_tx, ty, p.v_cruise)

    def _steer(self, obs: Observation, tx: float, ty: float, p_speed: float) -> MotorCommand:
        """Drive toward a local target point, nose-first or tail-first.

        The body picks whichever travel direction needs the smaller heading
        change and never turns around: a 32 cm capsule swinging through a
        u-turn would sweep well outside its own corridor and rake walls or
        neighbors. Homebound legs therefore run in reverse, tail leading.
        A small speed floor keeps re-orientations on an arc instead of a
        spot spin, which would sweep just as wide.
        """
        p = self.params
        dx, dy = tx - obs.x, ty - obs.y
        if math.hypot(dx, dy) < p.goal_tol:
            return MotorCommand()
        bearing = math.atan2(dy, dx)
        err_f = _wrap(bearing - obs.theta)
        err_b = _wrap(bearing - obs.theta - math.pi)
        if abs(err_f) <= abs(err_b):
            err, sign = err_f, 1.0
        else:
            err, sign = err_b, -1.0
        w = min(p.omega_max, max(-p.omega_max, p.heading_gain * err))
        v = sign * p_speed * max(p.arc_floor, math.cos(err))
        return MotorCommand(v, w)

    # --- maneuvers ------------------------------------------------------------------

    def _tick_maneuver(self, obs: Observation) -> MotorCommand:
        m = self.maneuver
        p = self.params
        if m is None:  # defensive: collision state without a maneuver
            self.fsm = GOING_HOME
            return MotorCommand()

        if m.phase == "backup":
            if obs.clock < m.phase_until:
                return MotorCommand(m.back_v, 0.0)
            if m.kind == "reversal":
                self._finish_maneuver(obs.clock)
                return MotorCommand()
            # passive: head for the nearest wall and grind along it past
            # whatever blocked the way; the gap between a blocker and a
            # wall is the one place a crawl-through is always worth trying
            jitter = math.radians(self.rng.uniform(-p.turn_jitter_deg,
                                                   p.turn_jitter_deg))
            mid = self.tunnel.width / 2.0
            y_hug = (self.tip_offset - 6.5) if obs.y <= mid \
                else self.tunnel.width - (self.tip_offset - 6.5)
            travel_sign = 1.0 if m.resume != GOING_HOME else -1.0
            press_heading = _wrap(math.atan2(y_hug - obs.y,
                                             travel_sign * 20.0) + jitter)
            # press nose-first or tail-first, whichever needs less turning
            rel_nose = _wrap(press_heading - obs.theta)
            rel_tail = _wrap(press_heading - obs.theta - math.pi)
            if abs(rel_nose) <= abs(rel_tail):
                rel, m.probe_v = rel_nose, p.v_cruise
            else:
                rel, m.probe_v = rel_tail, -p.v_cruise
            m.phase = "turn"
            m.turn_cmd = math.copysign(p.omega_max, rel) if rel else p.omega_max
            m.phase_until = obs.clock + abs(rel) / p.omega_max
            return MotorCommand(0.0, m.turn_cmd)

        if m.phase == "turn":
            if obs.clock < m.phase_until:
                return MotorCommand(0.0, m.turn_cmd)
            # commit to the drawn line for a short run before normal steering
            # takes back over; pure re-aiming at the old track would undo the
            # randomization and repeat the same approach
            m.phase = "probe"
            m.phase_until = obs.clock + p.probe_dist / p.v_cruise
            return MotorCommand(m.probe_v, 0.0)

        if m.phase == "probe":
            if obs.clock < m.phase_until:
                return MotorCommand(m.probe_v, 0.0)
            self._finish_maneuver(obs.clock)
            return MotorCommand()

        # push_burst
        if obs.clock >= m.push_deadline:
            # no lasting progress within the fallback window: yield passively
            m.kind = "passive"
            m.phase = "backup"
            m.phase_until = obs.clock + p.backup_dist / p.backup_speed
            return MotorCommand(m.back_v, 0.0)
        if obs.clock - self._last_robot_contact > 0.5:
            # whatever was being pushed is no longer there
            self._finish_maneuver(obs.clock)
            return MotorCommand()
        if obs.clock < m.phase_until:
            return self._push_command(obs, m)
        # burst boundary: check egocentric progress
        ox, oy = m.burst_origin
        moved = math.hypot(obs.x - ox, obs.y - oy)
        if moved < p.push_progress_cm:
            m.kind = "passive"
            m.phase = "backup"
            m.phase_until = obs.clock + p.backup_dist / p.backup_speed
            return MotorCommand(m.back_v, 0.0)
        m.phase_until = obs.clock + p.push_burst_s
        return self._push_command(obs, m, new_burst=True)

    def _push_command(self, obs: Observation, m: Maneuver, new_burst: bool = False) -> MotorCommand:
        # shove with whichever end already points at the target; a homebound
        # robot travels tail-first and pushes with its tail
        p = self.params
        if new_burst or m.burst_origin is None:
            m.burst_origin = (obs.x, obs.y)
        bearing = math.atan2(m.push_dir[1], m.push_dir[0])
        err_f = _wrap(bearing - obs.theta)
        err_b = _wrap(bearing - obs.theta - math.pi)
        if abs(err_f) <= abs(err_b):
            err, sign = err_f, 1.0
        else:
            err, sign = err_b, -1.0
        w = min(p.omega_max, max(-p.omega_max, p.heading_gain * err))
        v = sign * p.v_cruise * max(0.0, math.cos(err))
        return MotorCommand(v, w)

    def _finish_maneuver(self, clock: float) -> None:
        resume = self.maneuver.resume if self.maneuver else GOING_HOME
        self.maneuver = None
        self.fsm = resume
        self.state_entry_time = clock
        if resume == DIGGING:
            self.dig_dwell = 0.0

    # --- map decay accrual -------------------------------------------------------------

    def _accrue_decay(self) -> None:
        if self.contact_map is None or self.fsm == RESTING:
            return
        self._active_time_since_decay += self.dt
        while self._active_time_since_decay >= self.map_params.decay_interval_s:
            self.contact_map.decay(self.map_params.beta)
            self._active_time_since_decay -= self.map_params.decay_interval_s
