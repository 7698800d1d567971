"""Planar tunnel world: capsule robot bodies, unicycle kinematics,
quasi-static contact resolution, and pellet accounting.

The world is deliberately first-order. Bodies have no inertia; each step
integrates commanded velocities, then projects overlapping bodies apart
positionally. A powered-off (faulty) body never integrates a command and
moves only through that projection, which is how active robots push it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

ACTIVE = "active"
FAULTY = "faulty"

# outcomes of pellet_interaction
NONE = "none"
ACQUIRED = "acquired"
DEPOSITED = "deposited"

_WALLS = ("y_low", "y_high", "x_home_end", "x_dig_face")


class SimulationIntegrityError(RuntimeError):
    """Raised when the physical state stops making sense (NaN pose,
    body escaping the tunnel). Signals a bug, not a simulated outcome."""


@dataclass
class Pose:
    x: float
    y: float
    theta: float


@dataclass
class RobotBody:
    """Capsule body: core segment of half-length seg_half plus end radius.

    Total body length = 2 * (seg_half + radius); width = 2 * radius.
    """

    rid: int
    kind: str
    pose: Pose
    seg_half: float = 7.0
    radius: float = 9.0

    @property
    def tip_offset(self) -> float:
        return self.seg_half + self.radius

    def heading(self) -> tuple:
        return math.cos(self.pose.theta), math.sin(self.pose.theta)

    def segment(self) -> tuple:
        ux, uy = self.heading()
        hx, hy = self.seg_half * ux, self.seg_half * uy
        p = self.pose
        return (p.x + hx, p.y + hy), (p.x - hx, p.y - hy)

    def anterior(self) -> tuple:
        """Front tip of the capsule."""
        ux, uy = self.heading()
        return self.pose.x + self.tip_offset * ux, self.pose.y + self.tip_offset * uy


@dataclass
class Tunnel:
    length: float = 300.0
    width: float = 70.0
    home_x: float = 40.0
    dig_x: float = 260.0

    def validate(self, body_radius: float = 9.0) -> None:
        if self.length <= 0 or self.width <= 0:
            raise ValueError("tunnel length and width must be > 0")
        if not 0 < self.home_x < self.dig_x < self.length:
            raise ValueError(
                f"zone bounds must satisfy 0 < home_x < dig_x < length, "
                f"got home_x={self.home_x}, dig_x={self.dig_x}, length={self.length}"
            )
        if self.width <= 2 * body_radius:
            raise ValueError(
                f"width {self.width} cannot fit a robot "
                f"(needs > {2 * body_radius})"
            )


@dataclass
class WorldParams:
    mu: float = 0.4             # fraction of pair overlap taken by the faulty body
    kappa: float = 0.025        # rad of faulty rotation per cm of off-center push
    n_iter: int = 8             # max resolution passes per step
    eps_pen: float = 0.1        # cm of tolerated residual penetration
    dt: float = 0.05            # s
    dt_max: float = 0.2         # s
    v_max: float = 10.0         # cm/s
    omega_max: float = 1.5      # rad/s
    t_dig: float = 30.0         # s of anterior dwell in the dig zone per pellet

    def validate(self) -> None:
        if not 0 < self.mu < 1:
            raise ValueError(f"mu must be in (0, 1), got {self.mu}")
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if self.n_iter < 1:
            raise ValueError(f"n_iter must be >= 1, got {self.n_iter}")
        if self.eps_pen <= 0:
            raise ValueError(f"eps_pen must be > 0, got {self.eps_pen}")
        if not 0 < self.dt <= self.dt_max:
            raise ValueError(f"dt must be in (0, {self.dt_max}], got {self.dt}")
        if self.v_max <= 0 or self.omega_max <= 0:
            raise ValueError("v_max and omega_max must be > 0")
        if self.t_dig <= 0:
            raise ValueError(f"t_dig must be > 0, got {self.t_dig}")


@dataclass
class Collision:
    a: int                  # index into world.bodies
    b: int | None           # other body index, None for a wall contact
    wall: str | None
    depth: float
    normal: tuple           # unit vector along which body a must move apart
    point: tuple            # representative contact point on a's boundary


@dataclass
class ContactEvent:
    t: float
    a: int                  # robot id (not body index)
    b: int | None           # other robot id, None for wall
    wall: str | None
    point: tuple
    normal: tuple           # unit, pointing from the other object into robot a
    depth: float

    @property
    def true_type(self) -> str:
        return "wall" if self.b is None else "robot"


def _seg_seg_closest(p1, q1, p2, q2):
    """Closest points between segments p1-q1 and p2-q2.

    Returns (cx1, cy1, cx2, cy2, dist). Degenerate (parallel, touching,
    zero-length) cases fall out of the clamped projection without branching
    on geometry type.
    """
    d1x, d1y = q1[0] - p1[0], q1[1] - p1[1]
    d2x, d2y = q2[0] - p2[0], q2[1] - p2[1]
    rx, ry = p1[0] - p2[0], p1[1] - p2[1]
    a = d1x * d1x + d1y * d1y
    e = d2x * d2x + d2y * d2y
    f = d2x * rx + d2y * ry
    tiny = 1e-12
    if a <= tiny and e <= tiny:
        s = t = 0.0
    elif a <= tiny:
        s = 0.0
        t = min(1.0, max(0.0, f / e))
    else:
        c = d1x * rx + d1y * ry
        if e <= tiny:
            t = 0.0
            s = min(1.0, max(0.0, -c / a))
        else:
            b = d1x * d2x + d1y * d2y
            denom = a * e - b * b
            s = min(1.0, max(0.0, (b * f - c * e) / denom)) if denom > tiny else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(1.0, max(0.0, -c / a))
            elif t > 1.0:
                t = 1.0
                s = min(1.0, max(0.0, (b - c) / a))
    cx1, cy1 = p1[0] + d1x * s, p1[1] + d1y * s
    cx2, cy2 = p2[0] + d2x * t, p2[1] + d2y * t
    dx, dy = cx1 - cx2, cy1 - cy2
    return cx1, cy1, cx2, cy2, math.hypot(dx, dy)


def _wrap_angle(theta: float) -> float:
    return math.atan2(math.sin(theta), math.cos(theta))


class World:
    """All trial-mutable physical state plus the stepping engine."""

    def __init__(self, tunnel: Tunnel, bodies: list, params: WorldParams):
        tunnel.validate(body_radius=max(b.radius for b in bodies) if bodies else 9.0)
        params.validate()
        self.tunnel = tunnel
        self.bodies = bodies
        self.params = params
        self.clock = 0.0
        self.pellets = 0
        self.deposits: list = []        # (t, cumulative count)
        self.unresolved_steps = 0       # steps where resolution did not converge
        self._index = {b.rid: i for i, b in enumerate(bodies)}
        if len(self._index) != len(bodies):
            raise ValueError("robot ids must be unique")

    def body(self, rid: int) -> RobotBody:
        return self.bodies[self._index[rid]]

    # --- collision detection ------------------------------------------------

    def _wall_collisions(self, i: int, body: RobotBody) -> list:
        out = []
        (e1x, e1y), (e2x, e2y) = body.segment()
        r = body.radius
        w, l = self.tunnel.width, self.tunnel.length

        lo_y = min(e1y, e2y)
        if r - lo_y > 0:
            ex = e1x if e1y <= e2y else e2x
            out.append(Collision(i, None, "y_low", r - lo_y, (0.0, 1.0), (ex, lo_y - r)))
        hi_y = max(e1y, e2y)
        if hi_y + r - w > 0:
            ex = e1x if e1y >= e2y else e2x
            out.append(Collision(i, None, "y_high", hi_y + r - w, (0.0, -1.0), (ex, hi_y + r)))
        lo_x = min(e1x, e2x)
        if r - lo_x > 0:
            ey = e1y if e1x <= e2x else e2y
            out.append(Collision(i, None, "x_home_end", r - lo_x, (1.0, 0.0), (lo_x - r, ey)))
        hi_x = max(e1x, e2x)
        if hi_x + r - l > 0:
            ey = e1y if e1x >= e2x else e2y
            out.append(Collision(i, None, "x_dig_face", hi_x + r - l, (-1.0, 0.0), (hi_x + r, ey)))
        return out

    def detect_collisions(self) -> list:
        cols = []
        n = len(self.bodies)
        for i, a in enumerate(self.bodies):
            cols.extend(self._wall_collisions(i, a))
        for i in range(n):
            a = self.bodies[i]
            for j in range(i + 1, n):
                b = self.bodies[j]
                # broadphase: segment half-lengths plus radii
                reach = a.seg_half + a.radius + b.seg_half + b.radius
                dx = a.pose.x - b.pose.x
                dy = a.pose.y - b.pose.y
                if dx * dx + dy * dy > reach * reach:
                    continue
                pa1, pa2 = a.segment()
                pb1, pb2 = b.segment()
                cx1, cy1, cx2, cy2, dist = _seg_seg_closest(pa1, pa2, pb1, pb2)
                depth = a.radius + b.radius - dist
                if depth <= 0:
                    continue
                if dist > 1e-9:
                    nx, ny = (cx1 - cx2) / dist, (cy1 - cy2) / dist
                else:
                    # cores intersect exactly: push apart sideways from a's heading
                    hx, hy = a.heading()
                    nx, ny = -hy, hx
                point = (cx1 - a.radius * nx, cy1 - a.radius * ny)
                cols.append(Collision(i, j, None, depth, (nx, ny), point))
        return cols

    # --- overlap resolution -------------------------------------------------

    def _apply_pair_correction(self, c: Collision) -> None:
        a = self.bodies[c.a]
        b = self.bodies[c.b]
        nx, ny = c.normal
        if a.kind == b.kind:
            half = 0.5 * c.depth
            a.pose.x += nx * half
            a.pose.y += ny * half
            b.pose.x -= nx * half
            b.pose.y -= ny * half
            return
        # mixed pair: orient so (act, flt)
        if a.kind == ACTIVE:
            act, flt, fnx, fny = a, b, -nx, -ny
        else:
            act, flt, fnx, fny = b, a, nx, ny
        mu = self.params.mu
        act.pose.x += (1.0 - mu) * c.depth * -fnx
        act.pose.y += (1.0 - mu) * c.depth * -fny
        shift = mu * c.depth
        flt.pose.x += shift * fnx
        flt.pose.y += shift * fny
        # off-center pushes also turn the faulty body
        rx = c.point[0] - flt.pose.x
        ry = c.point[1] - flt.pose.y
        lever = math.hypot(rx, ry)
        if lever > 1e-9:
            cross = (rx / lever) * fny - (ry / lever) * fnx
            flt.pose.theta = _wrap_angle(flt.pose.theta + self.params.kappa * shift * cross)

    def resolve_overlaps(self) -> list:
        """Iteratively project overlapping bodies apart.

        Returns every distinct collision observed across the passes (the
        step's contact set). Corrections apply only above eps_pen; a faulty
        body in wall contact is corrected only while an active body is also
        pressing on it, so a parked faulty body never jitters on its own.
        """
        p = self.params
        seen: dict = {}
        converged = False
        for _ in range(p.n_iter):
            cols = self.detect_collisions()
            for c in cols:
                key = (c.a, c.b, c.wall)
                prev = seen.get(key)
                if prev is None or c.depth > prev.depth:
                    seen[key] = c
            deep = [c for c in cols if c.depth > p.eps_pen]
            if not deep:
                converged = True
                break
            faulty_pressed = {
                idx
                for c in cols
                if c.b is not None
                for idx in (c.a, c.b)
                if self.bodies[idx].kind == FAULTY
            }
            for c in deep:
                if c.b is None:
                    body = self.bodies[c.a]
                    if body.kind == FAULTY and c.a not in faulty_pressed:
                        continue
                    body.pose.x += c.normal[0] * c.depth
                    body.pose.y += c.normal[1] * c.depth
                else:
                    self._apply_pair_correction(c)
        if not converged:
            deep = [c for c in self.detect_collisions() if c.depth > p.eps_pen]
            if deep:
                self.unresolved_steps += 1
        return list(seen.values())

    # --- stepping -----------------------------------------------------------

    def step(self, commands: dict, dt: float | None = None) -> list:
        """Integrate one tick and return the contact events it produced.

        commands maps robot id to (v, omega); only active bodies accept one.
        """
        p = self.params
        if dt is None:
            dt = p.dt
        if not 0 < dt <= p.dt_max:
            raise ValueError(f"dt must be in (0, {p.dt_max}], got {dt}")
        for body in self.bodies:
            if body.kind != ACTIVE:
                continue
            cmd = commands.get(body.rid)
            if cmd is None:
                continue
            v = min(p.v_max, max(-p.v_max, cmd[0]))
            w = min(p.omega_max, max(-p.omega_max, cmd[1]))
            body.pose.x += v * math.cos(body.pose.theta) * dt
            body.pose.y += v * math.sin(body.pose.theta) * dt
            body.pose.theta = _wrap_angle(body.pose.theta + w * dt)
        self.clock += dt
        collisions = self.resolve_overlaps()
        self._check_integrity()
        events = []
        for c in sorted(collisions, key=lambda c: (c.a, -1 if c.b is None else c.b, c.wall or "")):
            a = self.bodies[c.a]
            b = self.bodies[c.b] if c.b is not None else None
            events.append(
                ContactEvent(
                    t=self.clock,
                    a=a.rid,
                    b=b.rid if b is not None else None,
                    wall=c.wall,
                    point=c.point,
                    normal=c.normal,
                    depth=c.depth,
                )
            )
        return events

    def _check_integrity(self) -> None:
        for body in self.bodies:
            pz = body.pose
            if not (math.isfinite(pz.x) and math.isfinite(pz.y) and math.isfinite(pz.theta)):
                raise SimulationIntegrityError(
                    f"robot {body.rid} pose is not finite at t={self.clock}: {pz}"
                )
            if not (0.0 <= pz.x <= self.tunnel.length and 0.0 <= pz.y <= self.tunnel.width):
                raise SimulationIntegrityError(
                    f"robot {body.rid} center left the tunnel at t={self.clock}: {pz}"
                )

    # --- pellets ------------------------------------------------------------

    def pellet_interaction(self, rid: int, carrying: bool, dwell_clock: float) -> str:
        """Arbitrates pellet pickup and deposit for one robot.

        Pickup needs the body's front tip inside the dig zone with enough
        accumulated dwell; deposit needs a carrying robot's center back in
        the home zone. Deposits increment the trial's cumulative count.
        """
        body = self.body(rid)
        if carrying:
            if body.pose.x < self.tunnel.home_x:
                self.pellets += 1
                self.deposits.append((self.clock, self.pellets))
                return DEPOSITED
            return NONE
        ax, _ = body.anterior()
        if ax > self.tunnel.dig_x and dwell_clock >= self.params.t_dig:
            return ACQUIRED
        return NONE
