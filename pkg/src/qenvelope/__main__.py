"""Allow ``python -m qenvelope`` to behave like the installed script."""

from .cli import run

run()
