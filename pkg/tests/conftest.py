import pytest

from hyline.topology import build_fat_tree, delay_for_rtt


@pytest.fixture(scope="session")
def topo():
    """k=4 fat tree, 16 hosts, 1 Gb/s links, 300 us empty-fabric RTT."""
    return build_fat_tree(4, 2, 1e9, delay_for_rtt(300e-6, 1e9))


@pytest.fixture(scope="session")
def topo0():
    """Same tree with zero propagation delay."""
    return build_fat_tree(4, 2, 1e9, 0.0)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
