from proxframework.cli import main, configure_logging

import sys
import logging

logger = logging.getLogger('proxframework')


if __name__ == '__main__':
    configure_logging()
    try:
        sys.exit(main(sys.argv[1:]))
    except KeyboardInterrupt:
        logger.warning('interrupted')
        sys.exit(130)
