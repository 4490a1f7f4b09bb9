import logging

logger = logging.getLogger(__name__)
logger.setLevel('DEBUG')

config_directory = '.prox'
