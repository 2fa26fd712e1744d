import importlib.metadata
__title__ = 'armlab'
__version__ = importlib.metadata.version(__title__)
