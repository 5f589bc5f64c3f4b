import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'moscale.settings')
django.setup()
