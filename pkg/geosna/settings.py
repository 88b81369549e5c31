"""
Django settings for the geosna project.
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Build paths
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get('SECRET_KEY', 'geosna-batch-pipeline')

DEBUG = os.environ.get('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    # Local apps
    'graph_core',
    'geo',
    'ingest',
    'aggregate',
    'analysis',
    'synth',
    'pipeline',
]

# ============================================
# DATABASE CONFIGURATION
# ============================================
import dj_database_url

if os.environ.get('DATABASE_URL'):
    DATABASES = {
        'default': dj_database_url.config(conn_max_age=600)
    }
else:
    # Local runs - SQLite
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': BASE_DIR / 'db.sqlite3',
        }
    }

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# ============================================
# LOGGING
# ============================================
GEOSNA_LOG_LEVEL = os.environ.get('GEOSNA_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'stage': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'stage',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': GEOSNA_LOG_LEVEL,
    },
}

# ============================================
# PIPELINE DEFAULTS
# ============================================
# Global grid cell area in km²
GEOSNA_GLOBAL_CELL_AREA_KM2 = float(os.environ.get('GEOSNA_GLOBAL_CELL_AREA_KM2', '80000'))
GEOSNA_AOI_CELL_AREA_KM2 = float(os.environ.get('GEOSNA_AOI_CELL_AREA_KM2', '100'))

# Europe AOI as min_lat,max_lat,min_lon,max_lon
GEOSNA_AOI_BBOX = os.environ.get('GEOSNA_AOI_BBOX', '34,72,-25,45')

GEOSNA_GISTAR_K = int(os.environ.get('GEOSNA_GISTAR_K', '30'))
GEOSNA_LOUVAIN_SEED = int(os.environ.get('GEOSNA_LOUVAIN_SEED', '42'))
GEOSNA_TOP_K_FLOWS = int(os.environ.get('GEOSNA_TOP_K_FLOWS', '15'))
GEOSNA_WEIGHTED_DEGREE = os.environ.get('GEOSNA_WEIGHTED_DEGREE', 'False') == 'True'
GEOSNA_THREADS = int(os.environ.get('GEOSNA_THREADS', str(os.cpu_count() or 1)))
GEOSNA_OUTPUT_DIR = os.environ.get('GEOSNA_OUTPUT_DIR', 'out')
GEOSNA_ORIGIN_COUNTRY = os.environ.get('GEOSNA_ORIGIN_COUNTRY', 'AT')
