import typer

from .commands.average import average_command
from .commands.classify import classify_command
from .commands.invariance import invariance_command
from .commands.limit import limit_command
from .commands.occupancy import occupancy_command
from .commands.sweep import sweep_command
from .utils.config import load_settings
from .utils.logging import setup_logging

app = typer.Typer(add_completion=False, no_args_is_help=True)


# Global options
@app.callback()
def main_callback(
    ctx: typer.Context,
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Suppress non-error output"),
):
    """
    ergodic-lab - numerical laboratory for multiple ergodic averages along floor iterates.

    Use --verbose/-v for detailed debug output.
    Use --quiet/-q to suppress informational messages.

    Exit codes: 0 ok, 1 unexpected error, 2 config error, 3 tolerance breach, 4 oracle mismatch.
    """
    # EAL_VERBOSE / EAL_QUIET and the config file fill in; an explicit flag wins
    settings = load_settings()
    verbose = verbose or (settings.verbose and not quiet)
    quiet = quiet or (settings.quiet and not verbose)

    logger = setup_logging(verbose=verbose, quiet=quiet)

    ctx.obj = {
        "verbose": verbose,
        "quiet": quiet,
        "logger": logger,
    }


app.command("classify", help="Classify functions into the growth classes")(classify_command)
app.command("average", help="Multiple ergodic averages along a checkpoint schedule")(average_command)
app.command("limit", help="Predicted limits and their oracles")(limit_command)
app.command("invariance", help="Invariance defect of the empirical measures")(invariance_command)
app.command("occupancy", help="Occupancy counts and term decomposition")(occupancy_command)
app.command("sweep", help="Grid of experiments over exponents or (gamma, ell)")(sweep_command)


if __name__ == "__main__":
    app()
