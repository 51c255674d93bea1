"""Smoke test for the Python bindings. Run after installing crates/python."""

import math

import doubling_routing_py as dr


def main():
    cfg = dr.SimConfig(n=150, radius=2.2, mobility="random_walk", speed=0.5, kappa=2, steps=30, pairs=10, seed=4)
    series = dr.run_simulation(cfg)
    assert series.delivered() == series.attempted() > 0
    assert series.stretch_violations() == 0
    assert series.max_stretch() <= series.stretch_bound
    assert series.metrics_csv().startswith("step,metric,value")
    again = dr.run_simulation(cfg)
    assert again.stretches() == series.stretches()

    sim = dr.Simulation(cfg.with_seed(5))
    rows = [sim.step() for _ in range(cfg.steps)]
    measured = [r for r in rows if r is not None]
    assert len(measured) == cfg.steps - sim.warmup
    assert len(sim.positions()) == 150

    pts = [(i % 6 * 1.0, i // 6 * 1.0) for i in range(36)]
    g = dr.Graph.geometric(pts, 1.1)
    assert g.edge_count() == 60
    assert dr.Graph.from_edge_list(g.to_edge_list()).edges() == g.edges()
    p = dr.Protocol(g, kappa=1.5)
    p.round(g, 0)
    p.check_invariants()
    route, _ = p.forward(g, 0, 35)
    assert route[0] == 0 and route[-1] == 35
    assert len(route) - 1 <= p.stretch_bound * 10

    ok, path = dr.greedy_georoute(g, pts, 0, 35)
    assert ok and len(path) == 11
    assert math.isclose(dr.supercritical_radius(1000, 1.0), math.sqrt(2 * math.log(1000)))
    print("smoke test passed")


if __name__ == "__main__":
    main()
