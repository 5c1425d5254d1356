__version__ = "0.1.0"

from .utils.logger import AppLogger

logger = AppLogger.get_logger(__name__)
logger.debug("mfsi package initialized")
