"""moscale URL configuration

Read-only JSON endpoints of the scaling app live under /scaling/.
"""
from django.urls import include, path

urlpatterns = [
    path('scaling/', include('scaling.urls')),
]
