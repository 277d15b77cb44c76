from termcolor import colored, cprint

PAD = 16


def hypotheses_str(params, report):
    """
    Table of exponents and the rate-estimate hypotheses
    """
    exps = report.exponents
    out = []
    out.append('p1, p2:'.ljust(PAD) + f'{params.p1:g}, {params.p2:g}')
    out.append('q1, q2:'.ljust(PAD) + f'{params.q1:g}, {params.q2:g}')
    out.append('n:'.ljust(PAD) + f'{params.n}')
    out.append('')
    for name in ['alpha', 'beta', 'theta1', 'theta2', 'mu1', 'mu2',
                 'q1_bound', 'q2_bound']:
        out.append(f'{name}:'.ljust(PAD) + f'{getattr(exps, name):.6g}')
    out.append('')
    out.append(_cond_line('max{a,b} >= n/2', report.cond_fujita,
                          report.margin_fujita))
    out.append(_cond_line('q1 < q1_bound', report.cond_q1, report.margin_q1))
    out.append(_cond_line('q2 < q2_bound', report.cond_q2, report.margin_q2))

    if report.holds:
        out.append(colored('hypotheses hold: rate estimates apply', 'green'))
    else:
        out.append(colored('hypotheses fail: no rate guarantee', 'yellow'))

    return '\n'.join(out)


def scalar_str(p, q, report):
    """
    The scalar hypotheses, for u = v on symmetric parameters
    """
    out = ['', f'scalar case u = v, p = {p:g}, q = {q:g}:']
    out.append(_cond_line('p <= 1 + 2/n', report.cond_p, report.margin_p))
    out.append(_cond_line('q < 2p/(1+p)', report.cond_q, report.margin_q))
    out.append('rate:'.ljust(PAD) + f'(T-t)^-{report.rate:.6g}')
    out.append('theta:'.ljust(PAD) + f'{report.theta:.6g}')
    return '\n'.join(out)


def _cond_line(label, ok, margin):
    mark = colored('yes', 'green') if ok else colored('no', 'red')
    return f'{label}:'.ljust(PAD) + f'{mark}  (margin {margin:+.4g})'


def verdict_str(command, message, passed, suffix=''):
    """
    eg 'fit: exponent 0.612 vs alpha 0.600, rel err 2.0% PASS@15%'
    """
    if passed is None:
        return f'{command}: {message}'
    tag = colored('PASS', 'green', attrs=['bold']) if passed else \
        colored('FAIL', 'red', attrs=['bold'])
    return f'{command}: {message} {tag}{suffix}'


def print_verdict(command, message, passed, suffix=''):
    print(verdict_str(command, message, passed, suffix))


def print_error(message):
    cprint(f'error: {message}', 'red')
