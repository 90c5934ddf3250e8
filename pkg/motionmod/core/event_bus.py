#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
事件总线：插件按优先级订阅生命周期事件.
"""

import bisect
import itertools
from typing import Any, Callable, Dict, List, Tuple

Handler = Callable[[Any], None]


class EventBus:
    """
    优先级小的处理器先执行，同优先级按订阅顺序.

    处理器抛出的异常记入 ``context.errors`` 并中止该事件的其余处理器；
    上下文没有 errors 列表时直接向上抛出.
    """

    def __init__(self):
        self._subscribers: Dict[str, List[Tuple[int, int, Handler]]] = {}
        self._order = itertools.count()

    def subscribe(self, event: str, handler: Handler, priority: int = 100) -> None:
        # 序号唯一，元组比较不会落到 handler 上
        bisect.insort(self._subscribers.setdefault(event, []), (priority, next(self._order), handler))

    def handlers(self, event: str) -> List[Handler]:
        return [handler for _, _, handler in self._subscribers.get(event, ())]

    def emit(self, event: str, context: Any) -> bool:
        """依次调用处理器；全部成功返回 True."""
        errors = getattr(context, "errors", None)
        for handler in self.handlers(event):
            try:
                handler(context)
            except Exception as exc:
                if not isinstance(errors, list):
                    raise
                errors.append((event, exc))
                return False
        return True
