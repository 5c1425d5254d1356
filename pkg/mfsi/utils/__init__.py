from .logger import AppLogger

__all__ = ["AppLogger"]
