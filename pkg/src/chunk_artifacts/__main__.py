"""Allow running the CLI as a module: python -m chunk_artifacts"""

from chunk_artifacts.cli import app

if __name__ == "__main__":
    app()
