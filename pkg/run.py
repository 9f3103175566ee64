"""
Run script for the Homotopy Warm-Start Engine

    python run.py toy
    python run.py generate --task cartpole --count 20 --out artifacts/cartpole
    python run.py cluster --out artifacts/cartpole
"""
from flask.cli import FlaskGroup

from app import create_app

cli = FlaskGroup(create_app=create_app, add_default_commands=False,
                 help='Homotopy Warm-Start Engine pipeline')

if __name__ == '__main__':
    cli()
