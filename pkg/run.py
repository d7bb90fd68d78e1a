from dotenv import load_dotenv

load_dotenv()

from amoebakit.cli import cli  # noqa: E402  (Config reads the environment at import)

if __name__ == "__main__":
    cli()
