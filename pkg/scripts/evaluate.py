#!/usr/bin/env python3
"""
Desk-scale acceptance experiments for cyberguard.

Runs, on the planted-token synthetic corpus:
- Overfit sanity (desk preset memorizes 32 comments, generalizes to 8 more)
- Explainer faithfulness (planted trigger ranked first, deletion lowers probability)
- Resampling guarantees (count targets met, held-out splits untouched)
"""

import json
import sys
import time
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import click
from rich.console import Console
from rich.table import Table

from src.desk_experiments import check_resampling, run_faithfulness, run_overfit, summary_rows

console = Console()


class DeskEvaluator:
    """Runs the acceptance experiments and reports them."""

    def __init__(self, seed: int, output_dir: Path, trials: int, epochs: int):
        """
        Args:
            seed: Seed for corpus, initialization and explanations
            output_dir: Directory for the results file
            trials: Explainer trials
            epochs: Overfit epochs
        """
        self.seed = seed
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.trials = trials
        self.epochs = epochs

    def run_evaluation(self) -> bool:
        """
        Returns:
            True when every criterion passes
        """
        console.print("[bold cyan]Starting desk acceptance experiments[/bold cyan]\n")

        console.print("[yellow]Overfit sanity...[/yellow]")
        start = time.time()
        overfit = run_overfit(seed=self.seed, epochs=self.epochs, show_progress=True)
        console.print(f"  ✓ {len(overfit.result.curve)} epochs in {time.time() - start:.1f}s")

        console.print("[yellow]Explainer faithfulness...[/yellow]")
        faithfulness = run_faithfulness(overfit.model, overfit.vocab, seed=self.seed, trials=self.trials)
        for miss in faithfulness.misses:
            console.print(f"  ✗ {miss}", markup=False)

        console.print("[yellow]Resampling guarantees...[/yellow]")
        resampling = check_resampling(seed=self.seed)

        rows = summary_rows(overfit, faithfulness, resampling)
        table = Table(title="Desk Acceptance Results")
        table.add_column("Criterion", style="cyan")
        table.add_column("Value", style="green")
        table.add_column("Target")
        table.add_column("Pass")
        for row in rows:
            table.add_row(*row)
        console.print("\n")
        console.print(table)

        report_path = self.output_dir / "desk_acceptance.json"
        with open(report_path, "w", encoding="utf-8") as f:
            json.dump({"seed": self.seed, "rows": rows}, f, indent=2, ensure_ascii=False)
        console.print(f"\n[green]Full report saved to: {report_path}[/green]\n")
        return all(row[3] == "✓" for row in rows)


@click.command()
@click.option("--seed", type=int, default=0, help="Experiment seed")
@click.option("--output", default="evaluation_results", help="Output directory for results")
@click.option("--trials", type=int, default=50, help="Explainer trials")
@click.option("--epochs", type=int, default=300, help="Overfit epochs")
def main(seed, output, trials, epochs):
    """Run the desk-scale acceptance experiments."""
    evaluator = DeskEvaluator(seed, Path(output), trials, epochs)
    sys.exit(0 if evaluator.run_evaluation() else 1)


if __name__ == "__main__":
    main()
