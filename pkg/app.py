import logging

import click

from config import DEBUG, DEFAULT_SEED, DEFAULT_THREADS, VERSION
from routes.commands import COMMANDS

# Configure logging
logging.basicConfig(
    level=logging.DEBUG if DEBUG else logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

logger = logging.getLogger(__name__)


def create_app():
    """Create and configure the lasiq command group"""

    @click.group()
    @click.version_option(VERSION, prog_name="lasiq")
    @click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True, help="Top-level seed (env LASIQ_SEED)")
    @click.option("--out", default="results", show_default=True, help="Output directory for artifacts and manifest")
    @click.option("--threads", type=int, default=DEFAULT_THREADS, show_default=True, help="Monte Carlo worker threads")
    @click.option("--quiet", is_flag=True, help="Only log warnings and errors")
    @click.pass_context
    def app(ctx, seed, out, threads, quiet):
        """Laser-anneal frequency trimming pipeline for fixed-frequency transmon lattices"""
        if quiet:
            logging.getLogger().setLevel(logging.WARNING)
        if threads < 1:
            raise click.BadParameter("must be >= 1", param_hint="--threads")
        ctx.obj = {"seed": seed, "out": out, "threads": threads}
        logger.debug(f"Invocation: seed={seed}, out={out}, threads={threads}")

    for command in COMMANDS:
        app.add_command(command)

    logger.debug("Command group created and configured successfully")
    return app


# Create app instance
app = create_app()

if __name__ == '__main__':
    app()
