from django.http import HttpRequest, JsonResponse

from . import market
from .det_equiv import l1_det_expected, l2_det_expected
from .experiment import entry_threshold, scaled_tau
from .kappa_solver import kappa_asymptotic, solve_kappa
from .problem_instance import is_infinite
from .serializers import DetEquivSerializer, EntryThresholdSerializer, \
    KappaSerializer, normalize_params


def _encode(value):
    """ JSON has no infinity; the marker and float infinities become 'inf'. """
    if value is None:
        return None
    if is_infinite(value) or value == float('inf'):
        return 'inf'
    if hasattr(value, 'value'):
        return value.value
    return value


def _validated(serializer_class, request: HttpRequest):
    serializer = serializer_class(
        data=normalize_params(request.GET.dict()))
    if not serializer.is_valid():
        return None, JsonResponse(serializer.errors, status=400)
    return serializer.validated_data, None


def _domain_error(error: Exception) -> JsonResponse:
    return JsonResponse({'error': str(error)}, status=400)


def kappa_view(request: HttpRequest):
    """ Effective regularizer of a power-law spectrum. """
    params, error_response = _validated(KappaSerializer, request)
    if error_response:
        return error_response
    try:
        result = solve_kappa(params['lam'], params['n'], params['problem'])
    except (ArithmeticError, ValueError) as error:
        return _domain_error(error)
    return JsonResponse({
        'kappa': result.kappa,
        'residual': result.residual,
        'iterations': result.iterations,
        'kappa_asymptotic': kappa_asymptotic(
            params['lam'], params['n'], params['gamma']),
    })


def detequiv_view(request: HttpRequest):
    """ Expected deterministic equivalent of the performance (l1) or
    safety (l2) loss. """
    params, error_response = _validated(DetEquivSerializer, request)
    if error_response:
        return error_response
    evaluate = l1_det_expected if params['objective'] == 'l1' \
        else l2_det_expected
    try:
        result = evaluate(params['problem'], params['config'])
    except (ArithmeticError, ValueError) as error:
        return _domain_error(error)
    return JsonResponse({
        'objective': params['objective'],
        'terms': list(result.terms),
        'q': result.q,
        'kappa': result.kappa,
        'value': result.value,
    })


def threshold_view(request: HttpRequest):
    """ Asymptotic entry threshold; the search mode is only offered on the
    command line. """
    params, error_response = _validated(EntryThresholdSerializer, request)
    if error_response:
        return error_response
    if params['mode'] == 'search':
        return JsonResponse(
            {'mode': ['The search mode is not served over HTTP.']},
            status=400)
    problem = params['problem']
    taus = {key: scaled_tau(problem, params[key], params['tau_scale'])
            for key in ('tau_i', 'tau_e')}
    try:
        threshold = entry_threshold(
            problem, params['mode'], params['safety_model'], params['n_i'],
            taus['tau_i'], taus['tau_e'])
        quantities = market.threshold_params(
            problem, taus['tau_i'], taus['tau_e'])
    except (ArithmeticError, ValueError) as error:
        return _domain_error(error)
    return JsonResponse({
        'mode': params['mode'],
        'safety_model': params['safety_model'],
        'lstar': quantities.lstar,
        'g_i': quantities.g_i,
        'g_e': quantities.g_e,
        'd': quantities.d,
        'n_e_star': _encode(threshold.value),
        'regime': _encode(threshold.regime),
        'monotone': threshold.monotone,
    })
