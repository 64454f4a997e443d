"""
Minimal settings for running the lab's management commands standalone
(``python manage.py colombeau_run ...``). Projects that install the app use
their own settings and may override any COLOMBEAU_* value there.
"""
SECRET_KEY = "colombeau-lab-standalone"

DEBUG = False

INSTALLED_APPS = [
    "colombeau_lab",
    "rest_framework",
    "django.contrib.contenttypes",
    "django.contrib.auth",
]

DATABASES = {}

USE_TZ = True

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "plain"},
    },
    "loggers": {
        "colombeau_lab": {"handlers": ["console"], "level": "INFO", "propagate": False},
    },
}

COLOMBEAU_THREADS = 1
COLOMBEAU_DEBUG = False
