"""
WSGI entry point serving the moscale JSON endpoints.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'moscale.settings')

application = get_wsgi_application()
