import logging

from record_store import save_moment_vector
from utils.recover import MomentCaps, build_theoretical_moments

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

# Prime sets and truncation boxes shipped with the repository
TABLES = [
    ((2,), MomentCaps(max_parts=3, size_cap=6, target_cap=2)),
    ((3,), MomentCaps(max_parts=3, size_cap=6, target_cap=2)),
    ((2, 3), MomentCaps(max_parts=2, size_cap=3, target_cap=1)),
]


def create_and_save_moment_tables():
    """
    Builds the theoretical Hom-moments for each box and saves them to disk.
    """
    for primes, caps in TABLES:
        logger.info(f"Building moments for primes {primes} with {len(caps.index_set())} indices per prime...")
        vector = build_theoretical_moments(primes, caps)
        path = save_moment_vector(vector)
        logger.info(f"Saved {len(vector.values)} moments to '{path}'.")
    logger.info("Moment tables are ready; 'main.py recover' will pick them up.")


if __name__ == "__main__":
    create_and_save_moment_tables()
