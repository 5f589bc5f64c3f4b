"""
ASGI entry point serving the moscale JSON endpoints.
"""

import os

from django.core.asgi import get_asgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'moscale.settings')

application = get_asgi_application()
