"""Command-line interface: serve, play, simulate, sweep, replay."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .errors import CoplanError
from .planner import SearchBudget
from .modelio import figure_layout_spec, write_log
from .session import SessionConfig, replay_log
from .sim import POLICIES, SimulatedUser, run_simulation, sweep_rows, write_sweep_csv


def _engine_options(fn):
    for option in reversed(
        [
            click.option("--tau", type=float, default=0.5, envvar="COPLAN_TAU", show_default=True,
                         help="Necessities threshold in [0,1]."),
            click.option("--head-start", "head_start", type=int, default=0, envvar="COPLAN_HEAD_START",
                         show_default=True, help="User actions observed before the agent responds."),
            click.option("--beta", type=float, default=1.0, envvar="COPLAN_BETA", show_default=True,
                         help="Likelihood sharpness."),
            click.option("--fallback", type=click.Choice(["noop", "default-goal"]), default="noop",
                         envvar="COPLAN_FALLBACK", show_default=True),
            click.option("--mode", type=click.Choice(["optimal", "satisficing"]), default="optimal",
                         envvar="COPLAN_MODE", show_default=True),
            click.option("--budget-nodes", type=int, default=200_000, envvar="COPLAN_BUDGET_NODES",
                         show_default=True),
            click.option("--budget-ms", type=float, default=20_000.0, envvar="COPLAN_BUDGET_MS",
                         show_default=True),
            click.option("--seed", type=int, default=0, envvar="COPLAN_SEED", show_default=True),
        ]
    ):
        fn = option(fn)
    return fn


def _config(tau, head_start, beta, fallback, mode, budget_nodes, budget_ms, seed, **extra):
    return SessionConfig.blockwords(
        tau=tau,
        head_start=head_start,
        beta=beta,
        fallback=fallback,
        mode=mode,
        budget=SearchBudget(budget_nodes, budget_ms),
        seed=seed,
        **extra,
    )


@click.group()
def main():
    """Assistive Block Words engine: watch a user play, infer their word,
    and help build it."""


@main.command()
@click.option("--host", default="127.0.0.1", envvar="COPLAN_HOST", show_default=True)
@click.option("--port", type=int, default=8000, envvar="COPLAN_PORT", show_default=True)
@click.option("--data-dir", default=None, envvar="COPLAN_DATA_DIR",
              help="Directory for per-session logs; enables crash recovery.")
def serve(host, port, data_dir):
    """Start the HTTP service (and restore any logged sessions)."""
    import uvicorn

    from .service import SessionRegistry, create_app

    registry = SessionRegistry(data_dir)
    restored = registry.restore()
    if restored:
        click.echo(f"restored {len(restored)} session(s) from {data_dir}")
    uvicorn.run(create_app(registry), host=host, port=port, log_level="info")


def _print_board(view):
    stacks = view["stacks"]
    height = max((len(s) for s in stacks), default=0)
    for level in range(height - 1, -1, -1):
        row = [s[level] if len(s) > level else " " for s in stacks]
        click.echo("  " + " ".join(row))
    click.echo("  " + "-" * max(1, 2 * len(stacks) - 1))
    held = ", ".join(f"{who}:{what or '-'}" for who, what in sorted(view["held"].items()))
    click.echo(f"held [{held}]   words: {' '.join(view['words'])}")
    if view["satisfiedWords"]:
        click.echo(f"completed: {', '.join(view['satisfiedWords'])}")


@main.command()
@_engine_options
@click.option("--debug/--no-debug", default=False, help="Show the agent's beliefs each turn.")
def play(tau, head_start, beta, fallback, mode, budget_nodes, budget_ms, seed, debug):
    """Play interactively in the terminal over the service API (loopback)."""
    from fastapi.testclient import TestClient

    from .service import SessionRegistry, create_app

    client = TestClient(create_app(SessionRegistry()))
    resp = client.post(
        "/sessions",
        json={
            "tau": tau,
            "headStart": head_start,
            "beta": beta,
            "fallback": fallback,
            "mode": mode,
            "budgetNodes": budget_nodes,
            "budgetMs": budget_ms,
            "seed": seed,
        },
    )
    resp.raise_for_status()
    sid = resp.json()["sessionId"]
    view = resp.json()["view"]
    click.echo("your move: e.g. 'pickup t', 'stack t h', 'unstack h e', 'putdown t', 'pass', 'quit'")
    while True:
        _print_board(view)
        if view["terminal"]:
            click.echo("game over")
            return
        raw = click.prompt("move", default="", show_default=False).strip()
        if not raw:
            continue
        if raw in ("quit", "q"):
            client.post(f"/sessions/{sid}/quit")
            click.echo("bye")
            return
        parts = raw.split()
        name = "noop" if parts[0] == "pass" else parts[0]
        args = ["user"] + parts[1:]
        resp = client.post(
            f"/sessions/{sid}/actions", json={"name": name, "args": args, "debug": debug}
        )
        if resp.status_code != 200:
            click.echo(f"rejected: {resp.json()['detail']}")
            continue
        result = resp.json()
        click.echo(f"you: {result['userAction']}   agent: {result['agentAction'] or '(game over)'}")
        if result["verdict"]["kind"] != "no-prediction":
            click.echo(f"monitor: {result['verdict']['kind']}")
        if debug and "debug" in result:
            snap = result["debug"]
            probs = " ".join(f"{w}={p:.3f}" for w, p in snap["posterior"]["probs"].items())
            click.echo(f"posterior: {probs}")
            if snap["intermediate"]:
                click.echo(f"intermediate: {snap['intermediate']['atoms']}"
                           f" conflicts={snap['intermediate']['conflicts']}")
            click.echo(f"decision: {snap['decision']}  predicted user: {snap['predictedUser']}")
        view = result["view"]


@main.command()
@_engine_options
@click.option("--goal", required=True, help="The simulated user's hidden word.")
@click.option("--policy", type=click.Choice(list(POLICIES)), default="optimal", show_default=True)
@click.option("--epsilon", type=float, default=0.25, show_default=True,
              help="Noise rate for the noisy policy.")
@click.option("--max-turns", type=int, default=60, show_default=True)
@click.option("--log", "log_path", type=click.Path(dir_okay=False), default=None,
              help="Write the session log here.")
@click.option("--plot", "plot_path", type=click.Path(dir_okay=False), default=None,
              help="Render the posterior trajectory to this image file.")
def simulate(tau, head_start, beta, fallback, mode, budget_nodes, budget_ms, seed,
             goal, policy, epsilon, max_turns, log_path, plot_path):
    """Run one simulated user against the agent and print the metrics."""
    words = figure_layout_spec().words
    if goal not in words:
        raise click.BadParameter(f"goal must be one of {', '.join(words)}")
    config = _config(tau, head_start, beta, fallback, mode, budget_nodes, budget_ms, seed,
                     true_goal=goal)
    user = SimulatedUser(true_goal=goal, policy=policy, epsilon=epsilon, seed=seed)
    result, session = run_simulation(config, user, max_turns)
    for record in session.records:
        click.echo(f"turn {record.turn:>2}  {record.actor:<5} {record.action}")
    click.echo(
        f"reached={str(result.reached).lower()} turns={result.turns} "
        f"userActions={result.user_actions} agentActions={result.agent_actions} "
        f"mismatches={result.mismatches} conflictFallbacks={result.conflict_fallbacks} "
        f"recognitionCalls={result.recognition_calls} holdingFlags={result.holding_flags}"
    )
    if log_path:
        write_log(log_path, session.log_header(), session.records)
        click.echo(f"log written to {log_path}")
    if plot_path:
        from .report import posterior_figure

        posterior_figure(result.posterior_history, plot_path)
        click.echo(f"figure written to {plot_path}")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


@main.command()
@click.option("--tau", "taus", default="0.2,0.5,0.9", show_default=True)
@click.option("--head-start", "head_starts", default="0,2", show_default=True)
@click.option("--beta", "betas", default="1.0", show_default=True)
@click.option("--policy", "policies", default="optimal", show_default=True,
              help="Comma-separated user policies.")
@click.option("--goals", default=None, help="Comma-separated words (default: all six).")
@click.option("--reps", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, envvar="COPLAN_SEED", show_default=True)
@click.option("--fallback", type=click.Choice(["noop", "default-goal"]), default="noop",
              show_default=True)
@click.option("--epsilon", type=float, default=0.25, show_default=True)
@click.option("--max-turns", type=int, default=60, show_default=True)
@click.option("--out", "outdir", type=click.Path(file_okay=False), required=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def sweep(taus, head_starts, betas, policies, goals, reps, seed, fallback, epsilon,
          max_turns, outdir, figures):
    """Run the parameter grid and write sweep.csv plus summary figures."""
    words = figure_layout_spec().words
    goal_list = [g for g in (goals.split(",") if goals else words) if g]
    for g in goal_list:
        if g not in words:
            raise click.BadParameter(f"unknown goal {g!r}")
    rows = sweep_rows(
        taus=_floats(taus),
        head_starts=_ints(head_starts),
        betas=_floats(betas),
        policies=[p for p in policies.split(",") if p],
        goals=goal_list,
        repetitions=reps,
        base_seed=seed,
        fallback=fallback,
        epsilon=epsilon,
        max_turns=max_turns,
    )
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "sweep.csv"
    write_sweep_csv(rows, csv_path)
    click.echo(f"{len(rows)} rows -> {csv_path}")
    if figures:
        from .report import sweep_figures

        for path in sweep_figures(rows, out):
            click.echo(f"figure written to {path}")


@main.command()
@click.argument("log_file", type=click.Path(exists=True, dir_okay=False))
def replay(log_file):
    """Verify that a session log replays exactly (digests and decisions)."""
    try:
        report = replay_log(log_file)
    except CoplanError as exc:
        click.echo(f"replay FAILED: {exc}")
        sys.exit(1)
    click.echo(f"replay OK ({report.turns} turns)")


if __name__ == "__main__":
    main()
