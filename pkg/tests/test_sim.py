import json

import pytest

from coplan.errors import ValidationError
from coplan.planner import SearchBudget
from coplan.session import SessionConfig
from coplan.sim import (
    SWEEP_COLUMNS,
    SimulatedUser,
    run_simulation,
    sweep_rows,
    write_sweep_csv,
)


def demo_config(**kwargs):
    kwargs.setdefault("tau", 0.5)
    kwargs.setdefault("head_start", 2)
    kwargs.setdefault("fallback", "default-goal")
    return SessionConfig.blockwords(**kwargs)


def test_optimal_user_reaches_goal_with_assistance():
    config = demo_config(true_goal="later")
    result, session = run_simulation(config, SimulatedUser("later", seed=3), max_turns=40)
    assert result.reached
    assert result.user_actions <= 8
    assert "later" in result.satisfied
    assert result.posterior_history[0]["later"] == pytest.approx(1 / 6)


def test_zero_epsilon_noisy_equals_optimal_transcript():
    base = demo_config(true_goal="father")
    optimal, s1 = run_simulation(base, SimulatedUser("father", "optimal", seed=11), 40)
    noisy, s2 = run_simulation(base, SimulatedUser("father", "noisy", epsilon=0.0, seed=11), 40)
    assert [r.action for r in s1.records] == [r.action for r in s2.records]
    assert optimal.as_row(base, SimulatedUser("father", seed=11)) == noisy.as_row(
        base, SimulatedUser("father", seed=11)
    )


def test_noisy_user_stays_legal_and_terminates():
    config = demo_config(true_goal="water", head_start=1, budget=SearchBudget(3000, 60_000))
    result, session = run_simulation(config, SimulatedUser("water", "noisy", epsilon=0.4, seed=4), 14)
    assert session.turn_counter <= 14
    # every recorded action was applied, so legality held throughout
    assert len(session.records) == session.turn_counter


def test_low_threshold_triggers_conflict_fallback():
    config = demo_config(tau=0.2, head_start=0, fallback="noop", true_goal="father")
    result, _ = run_simulation(config, SimulatedUser("father", seed=1), 30)
    assert result.conflict_fallbacks >= 1


def test_simulated_user_validation():
    with pytest.raises(ValidationError):
        SimulatedUser("father", policy="psychic")
    with pytest.raises(ValidationError):
        SimulatedUser("father", policy="noisy", epsilon=1.5)
    with pytest.raises(ValidationError):
        run_simulation(demo_config(true_goal="father"), SimulatedUser("father"), max_turns=0)


def test_sweep_cardinality_and_columns():
    rows = sweep_rows(
        taus=[0.2, 0.5, 0.9],
        head_starts=[0, 2],
        betas=[1.0],
        policies=["optimal"],
        goals=["father", "mother", "master", "faster", "later", "water"],
        repetitions=1,
        max_turns=2,
    )
    assert len(rows) == 36
    assert all(list(r) == list(SWEEP_COLUMNS) for r in rows)


def test_sweep_csv_bytes_deterministic(tmp_path):
    factory = lambda **kw: SessionConfig.blockwords(budget=SearchBudget(4000, 60_000), **kw)
    kwargs = dict(
        taus=[0.5],
        head_starts=[2],
        betas=[1.0],
        policies=["optimal"],
        goals=["father"],
        repetitions=2,
        base_seed=9,
        fallback="default-goal",
        max_turns=12,
        config_factory=factory,
    )
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_sweep_csv(sweep_rows(**kwargs), a)
    write_sweep_csv(sweep_rows(**kwargs), b)
    assert a.read_bytes() == b.read_bytes()
    header = a.read_text().splitlines()[0]
    assert header == ",".join(SWEEP_COLUMNS)


def test_sweep_requires_nonempty_grid():
    with pytest.raises(ValidationError):
        sweep_rows(taus=[], head_starts=[0], betas=[1.0], policies=["optimal"], goals=["father"])


def confuser_run(fallback, seed):
    config = SessionConfig.blockwords(
        tau=0.45, head_start=1, fallback=fallback, budget=SearchBudget(5000, 60_000)
    )
    user = SimulatedUser("mother", "confuser", seed=seed, decoy_turns=3)
    result, _ = run_simulation(config, user, max_turns=14)
    return result


def test_confuser_flag_appears_and_default_goal_clears_it():
    """The held-block freeze: reproducible under the noop fallback, gone
    under default-goal on the same seed (the acceptance suite scans more
    seeds)."""
    flagged = None
    for seed in range(6):
        if confuser_run("noop", seed).holding_flags:
            flagged = seed
            break
    assert flagged is not None, "no seed reproduced the held-block freeze"
    assert confuser_run("default-goal", flagged).holding_flags == 0


def test_report_figures(tmp_path):
    from coplan.report import posterior_figure, sweep_figures

    rows = sweep_rows(
        taus=[0.2, 0.9],
        head_starts=[0],
        betas=[1.0],
        policies=["optimal"],
        goals=["father"],
        max_turns=6,
    )
    paths = sweep_figures(rows, tmp_path)
    assert all(p.exists() and p.stat().st_size > 0 for p in paths)
    result, _ = run_simulation(demo_config(true_goal="father"), SimulatedUser("father"), 20)
    fig = posterior_figure(result.posterior_history, tmp_path / "posterior.png")
    assert fig.exists() and fig.stat().st_size > 0
