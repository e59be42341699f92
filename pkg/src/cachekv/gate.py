"""Triple-group role gate.

Readers run concurrently with readers, updaters with updaters, and an
inserter runs alone; any two distinct roles exclude each other. The gate
replaces a cross-device lock protocol with an in-process condition
variable carrying the same compatibility matrix.

Fairness is phase-fair: once a waiter of a different role is queued, new
arrivals of the currently active role line up behind it instead of
piggybacking, so a stream of readers cannot starve a pending inserter.
When the gate drains, the longest same-role prefix of the FIFO wait
queue is admitted as one group (an inserter group is always size one).
"""

from __future__ import annotations

import enum
import threading
from typing import Callable, Optional


class Role(enum.Enum):
    Reader = "reader"
    Updater = "updater"
    Inserter = "inserter"


# event tuples: (seq, event, role, active_count_after)
GateEvent = tuple[int, str, Role, int]


class RoleGuard:
    """Handle for one admitted operation; release exactly once."""

    __slots__ = ("_gate", "_role", "_released")

    def __init__(self, gate: "RoleGate", role: Role):
        self._gate = gate
        self._role = role
        self._released = False

    @property
    def role(self) -> Role:
        return self._role

    def release(self) -> None:
        if self._released:
            raise RuntimeError("guard already released")
        self._released = True
        self._gate._release(self._role)

    def __enter__(self) -> "RoleGuard":
        return self

    def __exit__(self, *exc) -> None:
        if not self._released:
            self.release()


class RoleGate:
    def __init__(self, event_hook: Optional[Callable[[GateEvent], None]] = None):
        self._cond = threading.Condition()
        self._active_role: Role | None = None
        self._active_count = 0
        self._queue: list[tuple[int, Role]] = []  # FIFO of (ticket, role)
        self._next_ticket = 0
        self._event_seq = 0
        self._event_hook = event_hook

    def _emit(self, event: str, role: Role) -> None:
        if self._event_hook is not None:
            self._event_seq += 1
            self._event_hook((self._event_seq, event, role, self._active_count))

    def _compatible(self, role: Role) -> bool:
        if self._active_role is None:
            return True
        return self._active_role is role and role is not Role.Inserter

    def _may_enter(self, ticket: int, role: Role) -> bool:
        # Admitted immediately only when compatible AND no earlier waiter
        # exists (phase fairness: earlier arrivals of any role go first).
        if not self._compatible(role):
            return False
        for t, _ in self._queue:
            if t < ticket:
                return False
        return True

    def acquire(self, role: Role) -> RoleGuard:
        """Block until the role may run; returns the releasing guard."""
        with self._cond:
            ticket = self._next_ticket
            self._next_ticket += 1
            if not self._may_enter(ticket, role):
                self._queue.append((ticket, role))
                while not self._head_admissible(ticket, role):
                    self._cond.wait()
                self._queue.remove((ticket, role))
            self._active_role = role
            self._active_count += 1
            self._emit("acquire", role)
        return RoleGuard(self, role)

    def try_acquire(self, role: Role) -> RoleGuard | None:
        """Non-blocking acquire; None when the gate would block."""
        with self._cond:
            ticket = self._next_ticket
            if not self._may_enter(ticket, role):
                return None
            self._next_ticket += 1
            self._active_role = role
            self._active_count += 1
            self._emit("acquire", role)
        return RoleGuard(self, role)

    def _head_admissible(self, ticket: int, role: Role) -> bool:
        # Wake rule: the queue head group (maximal same-role prefix) enters
        # when the gate is idle or already running that role concurrently.
        if not self._compatible(role):
            return False
        for t, r in self._queue:
            if t >= ticket:
                break
            if r is not role or role is Role.Inserter:
                return False
        return True

    def _release(self, role: Role) -> None:
        with self._cond:
            if self._active_count <= 0 or self._active_role is not role:
                raise RuntimeError("release does not match an active acquisition")
            self._active_count -= 1
            self._emit("release", role)
            if self._active_count == 0:
                self._active_role = None
            self._cond.notify_all()

    def active_state(self) -> tuple[Role | None, int]:
        with self._cond:
            return self._active_role, self._active_count


ROLE_OF_OPERATION = {
    "find": Role.Reader,
    "find_ptr": Role.Reader,
    "contains": Role.Reader,
    "size": Role.Reader,
    "load_factor": Role.Reader,
    "export_batch_if": Role.Reader,
    "assign": Role.Updater,
    "assign_scores": Role.Updater,
    "insert_or_assign": Role.Inserter,
    "insert_and_evict": Role.Inserter,
    "find_or_insert": Role.Inserter,
    "erase": Role.Inserter,
}
