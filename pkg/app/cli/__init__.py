"""
CLI package initialization
"""
from app.cli.commands import pipeline_bp

__all__ = ['pipeline_bp']
