import os

import django

# Mirror runtests.py so the Django test suite can be collected by pytest.
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'tests.settings')
django.setup()
