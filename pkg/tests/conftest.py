import itertools
import json
import math
from importlib import resources

import numpy as np
import pytest

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def brute_solvable(theta, eta, ws, g, T):
    """Independent check: does some integer q != 0 solve the system at T?

    Plain loops over the box |q_j| <= beta_j(T); no oracle code involved.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    eta = np.asarray(eta, dtype=float)
    n, m = theta.shape
    gT = float(g(T))
    row_lim = [float(a(gT)) for a in ws.alpha]
    col_lim = [float(b(T)) for b in ws.beta]
    ranges = [range(-int(math.floor(c)), int(math.floor(c)) + 1) for c in col_lim]
    for q in itertools.product(*ranges):
        if not any(q):
            continue
        if any(abs(qj) > cj for qj, cj in zip(q, col_lim)):
            continue
        ok = True
        for i in range(n):
            x = sum(theta[i, j] * q[j] for j in range(m)) - eta[i]
            if abs(x - round(x)) > row_lim[i]:
                ok = False
                break
        if ok:
            return True
    return False


def convergents(a0, partial, count):
    """Continued-fraction convergent denominators from partial quotients."""
    q_prev, q = 0, 1
    out = []
    for k in range(count):
        a = partial(k)
        q_prev, q = q, a * q + q_prev
        out.append(q)
    return out


@pytest.fixture
def schema():
    import jsonschema

    def check(obj, name):
        text = resources.files("gdirichlet").joinpath(f"schemas/{name}.schema.json").read_text()
        jsonschema.validate(obj, json.loads(text))
        return True
    return check


ACCEPTANCE_LINES = []


def acceptance_line(number, title, ok, detail=""):
    """Record and print one pass/fail line; the caller asserts ``ok`` afterwards."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
