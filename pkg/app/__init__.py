"""
Homotopy Warm-Start Engine
Main application factory
"""
import logging

from flask import Flask
from flask.logging import default_handler

from config import Config


def create_app(config_class=Config):
    """Create and configure the Flask application that hosts the pipeline commands"""
    app = Flask(__name__)
    app.config.from_object(config_class)

    # Route package loggers through Flask's handler
    package_logger = logging.getLogger('app')
    if default_handler not in package_logger.handlers:
        package_logger.addHandler(default_handler)
    package_logger.setLevel(app.config['LOG_LEVEL'])

    # Register blueprints
    from app.cli.commands import pipeline_bp
    app.register_blueprint(pipeline_bp)

    return app
