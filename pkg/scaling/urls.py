from django.urls import path

from . import views

urlpatterns = [
    path('kappa/', views.kappa_view, name='kappa'),
    path('detequiv/', views.detequiv_view, name='detequiv'),
    path('threshold/', views.threshold_view, name='threshold'),
]
